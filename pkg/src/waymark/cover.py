"""Covering a segment ``[0, d]`` twice with the fewest closed intervals.

The greedy solver keeps two frontiers: ``c``, up to which every point is
already seen by two chosen intervals, and ``c1``, up to which one of the
active intervals reaches.  Each round it adds the unused interval that starts
at or before ``c`` and reaches furthest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import Infeasible, TooLarge, UnknownSite
from .geometry import CoverInterval

BRUTE_FORCE_LIMIT = 20
_CHUNK = 1 << 14


@dataclass(frozen=True)
class CoverProblem:
    edge_length: float
    intervals: tuple[CoverInterval, ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if not self.edge_length > 0:
            raise ValueError("edge length must be positive")
        ids = [iv.site_id for iv in self.intervals]
        if len(set(ids)) != len(ids):
            raise ValueError("site ids must be distinct within a cover problem")
        for iv in self.intervals:
            if not 0 <= iv.a <= iv.b <= self.edge_length:
                raise ValueError(f"interval of site {iv.site_id} leaves [0, {self.edge_length}]")

    def by_id(self) -> dict[int, CoverInterval]:
        return {iv.site_id: iv for iv in self.intervals}


@dataclass(frozen=True)
class CoverSolution:
    chosen: tuple[int, ...]
    frontier: tuple[tuple[float, float], ...] = field(default=(), compare=False, repr=False)

    @property
    def cardinality(self) -> int:
        return len(self.chosen)


def _best(candidates):
    # argmax on the right endpoint, lowest site id on ties
    return min(candidates, key=lambda iv: (-iv.b, iv.site_id))


def greedy_two_cover(problem: CoverProblem) -> CoverSolution:
    """Minimum set of intervals covering every point of the edge twice.

    Raises :class:`Infeasible` carrying the frontier that could not be pushed.
    ``frontier`` on the result records ``(c, c1)`` after every selection round.
    """
    d = problem.edge_length
    unused = sorted(problem.intervals, key=lambda iv: iv.site_id)

    at_start = [iv for iv in unused if iv.a <= 0.0]
    if len(at_start) < 2:
        raise Infeasible(0.0)
    first = _best(at_start)
    second = _best([iv for iv in at_start if iv is not first])
    chosen = [first.site_id, second.site_id]
    unused = [iv for iv in unused if iv is not first and iv is not second]
    c, c1 = min(first.b, second.b), max(first.b, second.b)
    history = [(c, c1)]

    while c < d:
        candidates = [iv for iv in unused if iv.a <= c < iv.b]
        if not candidates:
            raise Infeasible(c)
        pick = _best(candidates)
        chosen.append(pick.site_id)
        unused.remove(pick)
        prev = (c, c1)
        c, c1 = min(c1, pick.b), max(c1, pick.b)
        # c stalls only while c == c1, and then c1 must grow
        assert (c, c1) > prev, "frontier failed to advance"
        history.append((c, c1))

    return CoverSolution(tuple(chosen), tuple(history))


def coverage_gap(problem: CoverProblem, chosen: Sequence[int]) -> Optional[float]:
    """First point of ``[0, d]`` seen by fewer than two chosen intervals, if any."""
    table = problem.by_id()
    missing = [sid for sid in chosen if sid not in table]
    if missing:
        raise UnknownSite(f"site(s) {missing} not part of this cover problem")
    picked = [table[sid] for sid in dict.fromkeys(chosen)]
    d = problem.edge_length

    points = {0.0, d}
    for iv in picked:
        points.update((iv.a, iv.b))
    critical = sorted(x for x in points if 0.0 <= x <= d)
    probes = []
    for lo, hi in zip(critical, critical[1:]):
        probes.extend((lo, 0.5 * (lo + hi)))
    probes.append(critical[-1])

    for x in probes:
        if sum(1 for iv in picked if iv.a <= x <= iv.b) < 2:
            return x
    return None


def verify_two_cover(problem: CoverProblem, chosen: Sequence[int]) -> tuple[bool, Optional[float]]:
    """Exact check that ``chosen`` covers the edge twice.

    Returns ``(ok, first_gap)`` where ``first_gap`` is ``None`` when ``ok``.
    """
    gap = coverage_gap(problem, chosen)
    return gap is None, gap


def brute_force_two_cover(problem: CoverProblem) -> Optional[CoverSolution]:
    """Exhaustive minimum 2-cover over every subset of the intervals.

    Coverage multiplicity only changes at interval endpoints, so each subset
    is checked at all endpoints and the midpoints between them.  Among the
    optimal subsets the lexicographically smallest sorted id tuple wins.
    """
    n = len(problem.intervals)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n} intervals exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}")
    if n < 2:
        return None
    ordered = sorted(problem.intervals, key=lambda iv: iv.site_id)
    d = problem.edge_length

    critical = sorted({0.0, d, *(iv.a for iv in ordered), *(iv.b for iv in ordered)})
    critical = [x for x in critical if 0.0 <= x <= d]
    probes = critical + [0.5 * (lo + hi) for lo, hi in zip(critical, critical[1:])]

    starts = np.array([iv.a for iv in ordered])
    ends = np.array([iv.b for iv in ordered])
    probes = np.array(probes)
    inside = (starts[None, :] <= probes[:, None]) & (probes[:, None] <= ends[None, :])
    probe_masks = (inside.astype(np.int64) << np.arange(n, dtype=np.int64)).sum(axis=1)

    good = []
    for start in range(0, 1 << n, _CHUNK):
        subsets = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        counts = np.bitwise_count(subsets[:, None] & probe_masks[None, :])
        good.append(subsets[(counts >= 2).all(axis=1)])
    good = np.concatenate(good)
    if good.size == 0:
        return None
    sizes = np.bitwise_count(good)
    best = good[sizes == sizes.min()]
    ids = [iv.site_id for iv in ordered]
    tuples = [tuple(ids[j] for j in range(n) if (int(m) >> j) & 1) for m in best]
    return CoverSolution(min(tuples))
