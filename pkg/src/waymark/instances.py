"""Random instance generation: targets in a rectangular field, grid of sites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AllSitesFiltered, EdgeInfeasible
from .geometry import CameraSpec, CandidateSite, PathPlan, Point2
from .planner import plan_placement

DEFAULT_CAMERA = CameraSpec(range_r=2.0, view_angle=math.radians(50.0), clearance=0.05)


@dataclass(frozen=True)
class Instance:
    camera: CameraSpec
    targets: tuple[Point2, ...]
    sites: tuple[Point2, ...]
    sim: dict = field(default_factory=dict)

    @property
    def path(self) -> PathPlan:
        return PathPlan(self.targets)

    @property
    def candidate_sites(self) -> list[CandidateSite]:
        return [CandidateSite(i, p) for i, p in enumerate(self.sites)]


def grid_sites(width: float, height: float, spacing: float) -> list[Point2]:
    """Regular grid over ``[0, width] x [0, height]``, both borders included."""
    nx = int(math.floor(width / spacing + 1e-9)) + 1
    ny = int(math.floor(height / spacing + 1e-9)) + 1
    return [Point2(i * spacing, j * spacing) for j in range(ny) for i in range(nx)]


def _path_length(pts: np.ndarray, order: list[int]) -> float:
    return float(np.linalg.norm(np.diff(pts[order], axis=0), axis=1).sum())


def open_tour(pts: np.ndarray) -> list[int]:
    """Nearest-neighbour open path from point 0, refined by 2-opt.

    The start stays fixed; the far end is free to change.
    """
    n = len(pts)
    order = [0]
    left = set(range(1, n))
    while left:
        last = pts[order[-1]]
        nxt = min(left, key=lambda j: (float(np.hypot(*(pts[j] - last))), j))
        order.append(nxt)
        left.remove(nxt)

    best = _path_length(pts, order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            for k in range(i + 1, n):
                cand = order[:i] + order[i:k + 1][::-1] + order[k + 1:]
                length = _path_length(pts, cand)
                if length < best - 1e-12:
                    order, best, improved = cand, length, True
    return order


def random_instance(rng: np.random.Generator, field_w: float = 4.0, field_h: float = 8.0,
                    n_targets: int = 6, grid_spacing: float = 0.5,
                    camera: Optional[CameraSpec] = None) -> Instance:
    if field_w <= 0 or field_h <= 0 or grid_spacing <= 0:
        raise ValueError("field dimensions and grid spacing must be positive")
    if n_targets < 2:
        raise ValueError("at least two targets are needed")
    pts = rng.uniform((0.0, 0.0), (field_w, field_h), size=(n_targets, 2))
    order = open_tour(pts)
    targets = tuple(Point2(float(pts[i, 0]), float(pts[i, 1])) for i in order)
    return Instance(camera or DEFAULT_CAMERA, targets, tuple(grid_sites(field_w, field_h, grid_spacing)))


def generate_instance(seed: int, field_w: float = 4.0, field_h: float = 8.0, n_targets: int = 6,
                      grid_spacing: float = 0.5, camera: Optional[CameraSpec] = None,
                      retry: int = 0) -> tuple[Instance, int, Optional[str]]:
    """Draw instances from ``seed`` until one is plannable or ``retry`` runs out.

    Returns ``(instance, attempts, reason)``; ``reason`` is ``None`` when the
    last instance is feasible, otherwise the planner's infeasibility message.
    """
    rng = np.random.default_rng(seed)
    reason = None
    for attempt in range(1, retry + 2):
        inst = random_instance(rng, field_w, field_h, n_targets, grid_spacing, camera)
        try:
            plan_placement(inst.path, inst.candidate_sites, inst.camera)
            return inst, attempt, None
        except (EdgeInfeasible, AllSitesFiltered) as exc:
            reason = str(exc)
    return inst, retry + 1, reason
