"""JSON instance and placement files.

Files are written canonically: fixed field order, two-space indent, floats in
shortest round-trip form.  Angles are stored in degrees, everything else in
SI units.  ``initial_covariance`` is the one exception and stays in
(m^2, m^2, rad^2) since it is a raw matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .geometry import CameraSpec, CoverInterval, Point2
from .instances import Instance
from .planner import Placement
from .simulator import SimConfig

PLACEMENT_FORMAT = "waymark-placement/1"

Finite = Annotated[float, Field(allow_inf_nan=False)]
XY = tuple[Finite, Finite]
Row3 = tuple[Finite, Finite, Finite]


class FileFormatError(ValueError):
    """A file could not be parsed; the message names the offending field or line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CameraModel(_Strict):
    range_m: Finite = Field(gt=0)
    view_angle_deg: Finite = Field(gt=0, le=180)
    clearance_m: Finite = Field(ge=0)


class ProcessNoiseModel(_Strict):
    x_m: Finite = Field(ge=0)
    y_m: Finite = Field(ge=0)
    psi_deg: Finite = Field(ge=0)


class SimModel(_Strict):
    speed_mps: Optional[Finite] = Field(default=None, gt=0)
    dt_s: Optional[Finite] = Field(default=None, gt=0)
    heading_gain: Optional[Finite] = Field(default=None, gt=0)
    process_noise_std: Optional[ProcessNoiseModel] = None
    bearing_noise_std_deg: Optional[Finite] = Field(default=None, ge=0)
    initial_covariance: Optional[tuple[Row3, Row3, Row3]] = None
    rng_seed: Optional[int] = None
    waypoint_capture_radius_m: Optional[Finite] = Field(default=None, gt=0)
    turn_tolerance_deg: Optional[Finite] = Field(default=None, gt=0)
    perturb_initial: Optional[bool] = None


class InstanceModel(_Strict):
    camera: CameraModel
    targets: list[XY] = Field(min_length=2)
    sites: list[XY] = Field(min_length=1)
    sim: Optional[SimModel] = None

    @field_validator("targets")
    @classmethod
    def _distinct_consecutive(cls, v):
        for i, (p, q) in enumerate(zip(v, v[1:]), start=1):
            if p == q:
                raise ValueError(f"targets {i - 1} and {i} coincide")
        return v


class SiteModel(_Strict):
    id: int = Field(ge=0)
    x: Finite
    y: Finite


class IntervalModel(_Strict):
    site_id: int
    a: Finite
    b: Finite


class EdgeModel(_Strict):
    index: int = Field(ge=1)
    length: Finite = Field(gt=0)
    sites: list[int]
    intervals: list[IntervalModel]


class SummaryModel(_Strict):
    per_edge: list[int]
    total: int


class PlacementModel(_Strict):
    format: str
    circular_fov: bool = False
    sites: list[SiteModel]
    edges: list[EdgeModel]
    summary: SummaryModel

    @field_validator("format")
    @classmethod
    def _known_format(cls, v):
        if v != PLACEMENT_FORMAT:
            raise ValueError(f"unsupported placement format {v!r}")
        return v


def _parse(text: str, model: type[BaseModel], source: str) -> Any:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        lines = [
            f"{source}: {'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        ]
        raise FileFormatError("\n".join(lines)) from None


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------- instances

def instance_to_dict(inst: Instance) -> dict:
    out = {
        "camera": {
            "range_m": float(inst.camera.range_r),
            "view_angle_deg": math.degrees(inst.camera.view_angle),
            "clearance_m": float(inst.camera.clearance),
        },
        "targets": [[float(p.x), float(p.y)] for p in inst.targets],
        "sites": [[float(p.x), float(p.y)] for p in inst.sites],
    }
    if inst.sim:
        out["sim"] = inst.sim
    return out


def parse_instance(text: str, source: str = "<instance>") -> Instance:
    m = _parse(text, InstanceModel, source)
    try:
        cam = CameraSpec(m.camera.range_m, math.radians(m.camera.view_angle_deg), m.camera.clearance_m)
    except ValueError as exc:
        raise FileFormatError(f"{source}: camera: {exc}") from None
    sim = m.sim.model_dump(exclude_none=True) if m.sim else {}
    if sim:
        try:
            sim_config(sim)
        except ValueError as exc:
            raise FileFormatError(f"{source}: sim: {exc}") from None
    return Instance(
        camera=cam,
        targets=tuple(Point2(x, y) for x, y in m.targets),
        sites=tuple(Point2(x, y) for x, y in m.sites),
        sim=sim,
    )


def save_instance(inst: Instance, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path: Union[str, Path]) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(), str(path))


def sim_config(overrides: dict, **extra) -> SimConfig:
    """Build a :class:`SimConfig` from instance-file ``sim`` overrides."""
    kw: dict[str, Any] = {}
    simple = {
        "speed_mps": "speed", "dt_s": "dt", "heading_gain": "heading_gain",
        "rng_seed": "rng_seed", "waypoint_capture_radius_m": "waypoint_capture_radius",
        "perturb_initial": "perturb_initial",
    }
    for key, name in simple.items():
        if key in overrides:
            kw[name] = overrides[key]
    if "process_noise_std" in overrides:
        pn = overrides["process_noise_std"]
        kw["process_noise_std"] = (pn["x_m"], pn["y_m"], math.radians(pn["psi_deg"]))
    if "bearing_noise_std_deg" in overrides:
        kw["bearing_noise_std"] = math.radians(overrides["bearing_noise_std_deg"])
    if "turn_tolerance_deg" in overrides:
        kw["turn_tolerance"] = math.radians(overrides["turn_tolerance_deg"])
    if "initial_covariance" in overrides:
        kw["initial_covariance"] = overrides["initial_covariance"]
    kw.update(extra)
    return SimConfig(**kw)


# --------------------------------------------------------------- placements

@dataclass(frozen=True)
class PlacementDoc:
    placement: Placement
    edge_lengths: dict[int, float]
    circular_fov: bool = False


def placement_to_dict(doc: PlacementDoc) -> dict:
    p = doc.placement
    edges = sorted(p.per_edge)
    return {
        "format": PLACEMENT_FORMAT,
        "circular_fov": doc.circular_fov,
        "sites": [{"id": sid, "x": float(p.positions[sid].x), "y": float(p.positions[sid].y)} for sid in p.sites],
        "edges": [
            {
                "index": k,
                "length": float(doc.edge_lengths[k]),
                "sites": list(p.per_edge[k]),
                "intervals": [
                    {"site_id": iv.site_id, "a": float(iv.a), "b": float(iv.b)}
                    for iv in p.per_edge_intervals[k]
                ],
            }
            for k in edges
        ],
        "summary": {"per_edge": [len(p.per_edge[k]) for k in edges], "total": p.total},
    }


def parse_placement(text: str, source: str = "<placement>") -> PlacementDoc:
    m = _parse(text, PlacementModel, source)
    positions = {s.id: Point2(s.x, s.y) for s in m.sites}
    if len(positions) != len(m.sites):
        raise FileFormatError(f"{source}: sites: duplicate site ids")
    per_edge, per_edge_intervals, lengths = {}, {}, {}
    for e in m.edges:
        unknown = [sid for sid in e.sites if sid not in positions]
        if unknown:
            raise FileFormatError(f"{source}: edges.{e.index}.sites: unknown site ids {unknown}")
        if [iv.site_id for iv in e.intervals] != e.sites:
            raise FileFormatError(f"{source}: edges.{e.index}.intervals: must list one interval per site, in order")
        try:
            ivs = tuple(CoverInterval(iv.site_id, iv.a, iv.b) for iv in e.intervals)
        except ValueError as exc:
            raise FileFormatError(f"{source}: edges.{e.index}.intervals: {exc}") from None
        per_edge[e.index] = tuple(e.sites)
        per_edge_intervals[e.index] = ivs
        lengths[e.index] = e.length
    used = {sid for ids in per_edge.values() for sid in ids}
    if used != set(positions):
        raise FileFormatError(f"{source}: sites: must equal the union of per-edge selections")
    placement = Placement(tuple(s.id for s in m.sites), per_edge, per_edge_intervals, positions)
    if m.summary.total != placement.total or m.summary.per_edge != [len(per_edge[k]) for k in sorted(per_edge)]:
        raise FileFormatError(f"{source}: summary: counts disagree with the edges")
    return PlacementDoc(placement, lengths, m.circular_fov)


def save_placement(doc: PlacementDoc, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(placement_to_dict(doc)))


def load_placement(path: Union[str, Path]) -> PlacementDoc:
    path = Path(path)
    return parse_placement(path.read_text(), str(path))
