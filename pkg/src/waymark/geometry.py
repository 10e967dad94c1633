"""Edge frames, field-of-view visibility and clearance filtering.

Every path edge is handled in its own rigid frame: the edge start sits at the
origin and the edge runs along the positive x axis up to ``(d, 0)``.  In that
frame the stretch of edge from which a site is visible is a closed interval
that can be written down in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateEdge

_MIN_EDGE = 1e-12


def wrap_angle(angle):
    """Wrap an angle, scalar or array, into (-pi, pi]."""
    wrapped = math.pi - np.mod(math.pi - np.asarray(angle, dtype=float), 2.0 * math.pi)
    # np.mod can round up to exactly 2*pi for tiny negative arguments
    wrapped = np.where(wrapped <= -math.pi, math.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: Point2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class CameraSpec:
    """Sensing geometry of the forward-looking camera.

    ``view_angle`` is the full opening angle in radians.  With ``circular``
    set the camera sees all around and ``view_angle`` is ignored.
    """

    range_r: float
    view_angle: float
    clearance: float = 0.0
    circular: bool = False

    def __post_init__(self):
        if not self.range_r > 0:
            raise ValueError("camera range must be positive")
        if not 0 < self.view_angle <= math.pi:
            raise ValueError("view angle must lie in (0, pi]")
        if not 0 <= self.clearance < self.range_r:
            raise ValueError("clearance must satisfy 0 <= p < R")

    @property
    def half_angle(self) -> float:
        return 0.5 * self.view_angle


@dataclass(frozen=True)
class CandidateSite:
    id: int
    position: Point2


@dataclass(frozen=True)
class PathPlan:
    """Ordered waypoints; edge ``i`` (1-based) joins waypoints ``i-1`` and ``i``."""

    waypoints: tuple[Point2, ...]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("a path needs at least two waypoints")
        for i, (p, q) in enumerate(zip(self.waypoints, self.waypoints[1:]), start=1):
            if p.distance_to(q) <= _MIN_EDGE:
                raise DegenerateEdge(f"edge {i} has zero length")

    @property
    def n_edges(self) -> int:
        return len(self.waypoints) - 1

    def edges(self):
        """Yield ``(edge_index, start, end)`` with 1-based indices."""
        for i in range(self.n_edges):
            yield i + 1, self.waypoints[i], self.waypoints[i + 1]


@dataclass(frozen=True)
class EdgeFrame:
    origin: Point2
    rotation: float
    length: float

    def to_local(self, p: Point2) -> Point2:
        return to_edge_frame(self, p)

    def to_world(self, q: Point2) -> Point2:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return Point2(self.origin.x + c * q.x - s * q.y, self.origin.y + s * q.x + c * q.y)

    def world_at(self, x: float) -> Point2:
        """World position of the edge-local abscissa ``x``."""
        return self.to_world(Point2(x, 0.0))


@dataclass(frozen=True)
class CoverInterval:
    """Closed stretch ``[a, b]`` of an edge over which ``site_id`` is visible."""

    site_id: int
    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError(f"interval for site {self.site_id} has a > b")


def edge_frame(t_i: Point2, t_next: Point2) -> EdgeFrame:
    dx, dy = t_next.x - t_i.x, t_next.y - t_i.y
    length = math.hypot(dx, dy)
    if length <= _MIN_EDGE:
        raise DegenerateEdge(f"edge endpoints coincide at ({t_i.x}, {t_i.y})")
    return EdgeFrame(origin=t_i, rotation=math.atan2(dy, dx), length=length)


def to_edge_frame(frame: EdgeFrame, p: Point2) -> Point2:
    # translate, then rotate by -theta
    dx, dy = p.x - frame.origin.x, p.y - frame.origin.y
    c, s = math.cos(frame.rotation), math.sin(frame.rotation)
    return Point2(c * dx + s * dy, -s * dx + c * dy)


def in_region_of_influence(site_local: Point2, d: float, cam: CameraSpec) -> bool:
    """Whether a site could be seen from some point of the edge ``[0, d]``."""
    x, y = site_local.x, site_local.y
    R, half = cam.range_r, cam.half_angle
    if abs(y) > R * math.sin(half):
        return False
    if not x > 0:
        return False
    if abs(math.atan2(y, x)) > half:
        return False
    if x >= d and (x - d) ** 2 + y * y > R * R:
        return False
    return True


def visibility_interval(site_local: Point2, d: float, cam: CameraSpec) -> Optional[CoverInterval]:
    """Edge-local interval over which a forward camera sees the site.

    Returns ``None`` when the site lies outside the region of influence.
    The returned interval carries ``site_id=-1``; callers attach the id.
    """
    if not in_region_of_influence(site_local, d, cam):
        return None
    x, y, d = site_local.x, abs(site_local.y), float(d)
    R = cam.range_r
    a = max(x - math.sqrt(max(R * R - y * y, 0.0)), 0.0)
    b = min(x - y / math.tan(cam.half_angle), d)
    # on the boundary of the region both endpoints meet; keep rounding from flipping them
    if b < a:
        b = a
    return CoverInterval(-1, a, b)


def visibility_interval_circular(site_local: Point2, d: float, cam: CameraSpec) -> Optional[CoverInterval]:
    """Edge-local interval over which an omnidirectional camera sees the site."""
    x, y, d = site_local.x, site_local.y, float(d)
    R = cam.range_r
    if abs(y) > R:
        return None
    half_chord = math.sqrt(R * R - y * y)
    lo, hi = x - half_chord, x + half_chord
    if hi < 0 or lo > d:
        return None
    return CoverInterval(-1, max(lo, 0.0), min(hi, d))


def _visible(px, py, heading, sx, sy, range_r, half_angle, circular=False):
    # array-friendly core shared by is_visible and the vectorised sampler
    dx, dy = sx - px, sy - py
    in_range = np.hypot(dx, dy) <= range_r
    if circular:
        return in_range
    off = np.abs(wrap_angle(np.arctan2(dy, dx) - heading))
    return in_range & (off <= half_angle)


def is_visible(vehicle_pos: Point2, heading: float, site: Point2, cam: CameraSpec) -> bool:
    return bool(_visible(vehicle_pos.x, vehicle_pos.y, heading, site.x, site.y,
                         cam.range_r, cam.half_angle, cam.circular))


def visible_mask(xs: np.ndarray, ys: np.ndarray, heading, site: Point2, cam: CameraSpec) -> np.ndarray:
    """Vectorised :func:`is_visible` over many vehicle positions."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return np.asarray(_visible(xs, ys, np.asarray(heading, dtype=float), site.x, site.y,
                               cam.range_r, cam.half_angle, cam.circular))


def visible_sites(vehicle_pos: Point2, heading: float, site_xs: np.ndarray, site_ys: np.ndarray,
                  cam: CameraSpec) -> np.ndarray:
    """Vectorised :func:`is_visible` over many sites from one pose."""
    return np.asarray(_visible(vehicle_pos.x, vehicle_pos.y, heading, np.asarray(site_xs, dtype=float),
                               np.asarray(site_ys, dtype=float), cam.range_r, cam.half_angle, cam.circular))


def point_segment_distance(p: Point2, seg_start: Point2, seg_end: Point2) -> float:
    vx, vy = seg_end.x - seg_start.x, seg_end.y - seg_start.y
    wx, wy = p.x - seg_start.x, p.y - seg_start.y
    norm2 = vx * vx + vy * vy
    if norm2 == 0.0:
        return math.hypot(wx, wy)
    t = min(max((wx * vx + wy * vy) / norm2, 0.0), 1.0)
    return math.hypot(wx - t * vx, wy - t * vy)


def filter_sites_by_clearance(sites: Sequence[CandidateSite], path: PathPlan, p: float) -> list[CandidateSite]:
    """Keep the sites lying strictly farther than ``p`` from every path edge."""
    edges = [(s, e) for _, s, e in path.edges()]
    return [
        site for site in sites
        if all(point_segment_distance(site.position, s, e) > p for s, e in edges)
    ]


def edge_intervals(frame: EdgeFrame, sites: Sequence[CandidateSite], cam: CameraSpec) -> list[CoverInterval]:
    """Nonempty visibility intervals of ``sites`` on the edge described by ``frame``."""
    interval_fn = visibility_interval_circular if cam.circular else visibility_interval
    out = []
    for site in sites:
        iv = interval_fn(to_edge_frame(frame, site.position), frame.length, cam)
        if iv is not None:
            out.append(CoverInterval(site.id, iv.a, iv.b))
    return out
