"""Path-level landmark placement built from independent per-edge covers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cover import CoverProblem, greedy_two_cover
from .errors import AllSitesFiltered, EdgeInfeasible, Infeasible
from .geometry import (
    CameraSpec,
    CandidateSite,
    CoverInterval,
    PathPlan,
    Point2,
    edge_frame,
    edge_intervals,
    filter_sites_by_clearance,
    visible_mask,
)

__all__ = [
    "CandidateSite",
    "PathPlan",
    "Placement",
    "EdgeReport",
    "VerificationReport",
    "build_cover_problems",
    "plan_placement",
    "verify_placement",
    "default_step",
]


@dataclass(frozen=True)
class Placement:
    """Chosen landmarks for a whole path.

    ``per_edge`` and ``per_edge_intervals`` are keyed by 1-based edge index.
    ``positions`` holds the world position of every chosen site.
    """

    sites: tuple[int, ...]
    per_edge: dict[int, tuple[int, ...]]
    per_edge_intervals: dict[int, tuple[CoverInterval, ...]]
    positions: dict[int, Point2]

    @property
    def total(self) -> int:
        return len(self.sites)

    def without(self, site_id: int) -> Placement:
        """Copy of the placement with one landmark removed everywhere."""
        return Placement(
            sites=tuple(s for s in self.sites if s != site_id),
            per_edge={k: tuple(s for s in v if s != site_id) for k, v in self.per_edge.items()},
            per_edge_intervals={
                k: tuple(iv for iv in v if iv.site_id != site_id)
                for k, v in self.per_edge_intervals.items()
            },
            positions={k: p for k, p in self.positions.items() if k != site_id},
        )


def build_cover_problems(path: PathPlan, sites: Sequence[CandidateSite], cam: CameraSpec) -> dict[int, CoverProblem]:
    """One cover problem per edge over the given (already filtered) sites."""
    problems = {}
    for index, start, end in path.edges():
        frame = edge_frame(start, end)
        problems[index] = CoverProblem(frame.length, edge_intervals(frame, sites, cam))
    return problems


def plan_placement(path: PathPlan, sites: Sequence[CandidateSite], cam: CameraSpec) -> Placement:
    if not sites:
        raise ValueError("no candidate sites given")
    usable = filter_sites_by_clearance(sites, path, cam.clearance)
    if not usable:
        raise AllSitesFiltered(f"clearance {cam.clearance} m removes all {len(sites)} sites")
    lookup = {s.id: s.position for s in usable}

    per_edge: dict[int, tuple[int, ...]] = {}
    per_edge_intervals: dict[int, tuple[CoverInterval, ...]] = {}
    for index, problem in build_cover_problems(path, usable, cam).items():
        try:
            solution = greedy_two_cover(problem)
        except Infeasible as exc:
            start, end = path.waypoints[index - 1], path.waypoints[index]
            where = edge_frame(start, end).world_at(exc.uncovered_at)
            raise EdgeInfeasible(index, exc.uncovered_at, (where.x, where.y)) from exc
        table = problem.by_id()
        per_edge[index] = solution.chosen
        per_edge_intervals[index] = tuple(table[s] for s in solution.chosen)

    chosen = sorted({s for ids in per_edge.values() for s in ids})
    return Placement(
        sites=tuple(chosen),
        per_edge=per_edge,
        per_edge_intervals=per_edge_intervals,
        positions={s: lookup[s] for s in chosen},
    )


@dataclass(frozen=True)
class EdgeReport:
    index: int
    samples: int
    min_visible: int
    mean_visible: float
    first_violation: Optional[tuple[float, float]] = None  # world (x, y)
    violation_count: int = 0


@dataclass(frozen=True)
class VerificationReport:
    edges: tuple[EdgeReport, ...]
    violations: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "violations", sum(e.violation_count for e in self.edges))

    @property
    def ok(self) -> bool:
        return self.violations == 0

    @property
    def first_violation(self) -> Optional[tuple[int, tuple[float, float]]]:
        for e in self.edges:
            if e.first_violation is not None:
                return e.index, e.first_violation
        return None


def default_step(edge_length: float) -> float:
    return max(1e-3 * edge_length, 1e-3)


def verify_placement(path: PathPlan, placement: Placement, cam: CameraSpec,
                     step: Optional[float] = None) -> VerificationReport:
    """Sample every edge and count placed landmarks the camera actually sees.

    The heading is locked to the edge direction.  ``step`` is in meters; when
    omitted each edge uses a thousandth of its length, floored at 1 mm.
    Uses only the pointwise visibility test, never the cover intervals.
    """
    if step is not None and not step > 0:
        raise ValueError("step must be positive")
    reports = []
    for index, start, end in path.edges():
        frame = edge_frame(start, end)
        h = step if step is not None else default_step(frame.length)
        n = int(np.floor(frame.length / h))
        xs = np.arange(n + 1) * h
        if xs[-1] < frame.length:
            xs = np.append(xs, frame.length)
        c, s = np.cos(frame.rotation), np.sin(frame.rotation)
        px, py = start.x + c * xs, start.y + s * xs

        counts = np.zeros(xs.size, dtype=int)
        for sid in placement.sites:
            counts += visible_mask(px, py, frame.rotation, placement.positions[sid], cam)
        bad = np.flatnonzero(counts < 2)
        first = (float(px[bad[0]]), float(py[bad[0]])) if bad.size else None
        reports.append(EdgeReport(
            index=index,
            samples=int(xs.size),
            min_visible=int(counts.min()),
            mean_visible=float(counts.mean()),
            first_violation=first,
            violation_count=int(bad.size),
        ))
    return VerificationReport(tuple(reports))
