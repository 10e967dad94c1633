"""``waymark`` command line: generate, plan, verify, simulate, plot.

Exit codes: 0 success, 1 infeasible instance, 2 verification failure,
3 I/O or parse error, 4 filter nonconvergence.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cover import CoverProblem, verify_two_cover
from .errors import AllSitesFiltered, EdgeInfeasible, NonconvergentFilter
from .fileio import (
    FileFormatError,
    PlacementDoc,
    dumps,
    instance_to_dict,
    load_instance,
    load_placement,
    placement_to_dict,
    sim_config,
)
from .geometry import CameraSpec, CandidateSite, edge_frame, edge_intervals
from .instances import Instance, generate_instance
from .planner import plan_placement, verify_placement
from .simulator import read_trace_csv, simulate, three_sigma_report, write_trace_csv
from .svgplot import render_svg

EXIT_OK, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_IO, EXIT_FILTER = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _load_instance(path: str) -> Instance:
    try:
        return load_instance(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except FileFormatError as exc:
        raise CliError(str(exc), EXIT_IO) from None


def _load_placement(path: str, inst: Instance) -> PlacementDoc:
    try:
        doc = load_placement(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except FileFormatError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    p = doc.placement
    for sid in p.sites:
        if sid >= len(inst.sites) or inst.sites[sid] != p.positions[sid]:
            raise CliError(f"{path}: site {sid} does not match the instance", EXIT_IO)
    if sorted(p.per_edge) != list(range(1, len(inst.targets))):
        raise CliError(f"{path}: edge list does not match the instance path", EXIT_IO)
    return doc


def _camera(inst: Instance, circular: bool) -> CameraSpec:
    return replace(inst.camera, circular=circular)


def _plan(inst: Instance, circular: bool) -> PlacementDoc:
    path = inst.path
    placement = plan_placement(path, inst.candidate_sites, _camera(inst, circular))
    lengths = {k: edge_frame(a, b).length for k, a, b in path.edges()}
    return PlacementDoc(placement, lengths, circular)


# ------------------------------------------------------------------ commands

def cmd_generate(args) -> int:
    cam = CameraSpec(args.range, math.radians(args.view_angle), args.clearance, circular=args.circular_fov)
    field_w, field_h = args.field
    if args.targets < 2 or field_w <= 0 or field_h <= 0 or args.grid <= 0 or args.retry < 0:
        raise CliError("need --targets >= 2, positive --field and --grid, and --retry >= 0", EXIT_IO)
    inst, attempts, reason = generate_instance(args.seed, field_w, field_h, args.targets, args.grid,
                                               camera=cam, retry=args.retry)
    inst = replace(inst, camera=replace(inst.camera, circular=False))
    _write(args.out, dumps(instance_to_dict(inst)))
    print(f"{len(inst.targets)} targets, {len(inst.sites)} candidate sites, attempts: {attempts}", file=sys.stderr)
    if reason is not None:
        raise CliError(f"generated instance is infeasible: {reason}", EXIT_INFEASIBLE)
    return EXIT_OK


def cmd_plan(args) -> int:
    inst = _load_instance(args.instance)
    try:
        doc = _plan(inst, args.circular_fov)
    except (EdgeInfeasible, AllSitesFiltered) as exc:
        raise CliError(f"infeasible: {exc}", EXIT_INFEASIBLE) from None
    _write(args.out, dumps(placement_to_dict(doc)))
    report = sys.stdout if args.out not in (None, "-") else sys.stderr
    for k in sorted(doc.placement.per_edge):
        print(f"edge {k}: {len(doc.placement.per_edge[k])} landmarks", file=report)
    print(f"total: {doc.placement.total} landmarks", file=report)
    return EXIT_OK


def _verify(inst: Instance, doc: PlacementDoc, step: Optional[float], out) -> bool:
    cam = _camera(inst, doc.circular_fov)
    path = inst.path
    report = verify_placement(path, doc.placement, cam, step)
    exact_ok = True
    for e in report.edges:
        start, end = path.waypoints[e.index - 1], path.waypoints[e.index]
        frame = edge_frame(start, end)
        chosen = doc.placement.per_edge[e.index]
        chosen_sites = [CandidateSite(sid, doc.placement.positions[sid]) for sid in chosen]
        problem = CoverProblem(frame.length, edge_intervals(frame, chosen_sites, cam))
        known = {iv.site_id for iv in problem.intervals}
        ok, gap = verify_two_cover(problem, [s for s in chosen if s in known])
        exact_ok &= ok
        line = (f"edge {e.index}: samples={e.samples} min_visible={e.min_visible} "
                f"mean_visible={e.mean_visible:.3f} violations={e.violation_count}")
        if e.first_violation is not None:
            line += f" first_violation=({e.first_violation[0]:.4f}, {e.first_violation[1]:.4f})"
        if not ok:
            line += f" exact_gap_at={gap:.6g}"
        print(line, file=out)
    clean = report.ok and exact_ok
    print(f"{'OK' if clean else 'FAIL'}: {report.violations} sampled violations", file=out)
    return clean


def cmd_verify(args) -> int:
    inst = _load_instance(args.instance)
    doc = _load_placement(args.placement, inst)
    if args.step is not None and not args.step > 0:
        raise CliError("--step must be positive", EXIT_IO)
    if not _verify(inst, doc, args.step, sys.stdout):
        return EXIT_VERIFY
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = _load_instance(args.instance)
    doc = _load_placement(args.placement, inst)
    if not _verify(inst, doc, None, io.StringIO()):
        raise CliError("placement fails verification; refusing to simulate", EXIT_VERIFY)
    extra = {"rng_seed": args.seed} if args.seed is not None else {}
    try:
        cfg = sim_config(inst.sim, **extra)
    except ValueError as exc:
        raise CliError(f"invalid simulation settings: {exc}", EXIT_IO) from None
    try:
        trace = simulate(inst.path, doc.placement, inst.candidate_sites, _camera(inst, doc.circular_fov), cfg)
    except NonconvergentFilter as exc:
        raise CliError(str(exc), EXIT_FILTER) from None
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    _write(args.out, buf.getvalue())
    report = sys.stdout if args.out not in (None, "-") else sys.stderr
    print(f"steps: {len(trace)}  duration: {trace.time[-1]:.2f} s  seed: {cfg.rng_seed}", file=report)
    for axis, st in three_sigma_report(trace).items():
        print(f"{axis}: within 3-sigma {100 * st.containment:.1f}%  max|err|={st.max_error:.4g}  "
              f"max sigma={st.max_sigma:.4g}", file=report)
    return EXIT_OK


def cmd_plot(args) -> int:
    inst = _load_instance(args.instance)
    doc = _load_placement(args.placement, inst)
    trace = None
    if args.trace:
        try:
            with open(args.trace, newline="") as fh:
                trace = read_trace_csv(fh)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read trace {args.trace}: {exc}", EXIT_IO) from None
    _write(args.out, render_svg(inst.targets, inst.sites, doc.placement, trace))
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waymark", description="Landmark placement for bearing-only localization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="random instance: targets in a field plus a grid of candidate sites")
    g.add_argument("--field", nargs=2, type=float, default=(4.0, 8.0), metavar=("W", "H"))
    g.add_argument("--targets", type=int, default=6)
    g.add_argument("--grid", type=float, default=0.5, metavar="SPACING")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--retry", type=int, default=0, metavar="N", help="regenerate up to N times while infeasible")
    g.add_argument("--range", type=float, default=2.0, help="camera range in meters")
    g.add_argument("--view-angle", type=float, default=50.0, help="camera view angle in degrees")
    g.add_argument("--clearance", type=float, default=0.05, help="minimum path-to-landmark distance in meters")
    g.add_argument("--circular-fov", action="store_true", help="check feasibility with an omnidirectional camera")
    g.add_argument("--out", metavar="PATH")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("plan", help="choose landmark sites")
    p.add_argument("--instance", required=True, metavar="PATH")
    p.add_argument("--circular-fov", action="store_true", help="use the omnidirectional visibility intervals")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_plan)

    v = sub.add_parser("verify", help="check two-landmark visibility along the path")
    v.add_argument("--instance", required=True, metavar="PATH")
    v.add_argument("--placement", required=True, metavar="PATH")
    v.add_argument("--step", type=float, metavar="METERS", help="sampling step (default: 1e-3 of each edge)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="run the EIF localization simulation and write a CSV trace")
    s.add_argument("--instance", required=True, metavar="PATH")
    s.add_argument("--placement", required=True, metavar="PATH")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", metavar="PATH")
    s.set_defaults(func=cmd_simulate)

    pl = sub.add_parser("plot", help="render an SVG of the instance and placement")
    pl.add_argument("--instance", required=True, metavar="PATH")
    pl.add_argument("--placement", required=True, metavar="PATH")
    pl.add_argument("--trace", metavar="PATH", help="CSV trace from `simulate`")
    pl.add_argument("--out", metavar="PATH")
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which is reserved for verification failures here
        return EXIT_IO if exc.code == 2 else exc.code
    try:
        return args.func(args)
    except CliError as exc:
        print(f"waymark {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"waymark {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
