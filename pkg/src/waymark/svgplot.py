"""Self-contained SVG overlay of a path, its candidate sites and a placement."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Optional, Sequence

from .geometry import Point2, edge_frame
from .planner import Placement
from .simulator import SimTrace

SVG_NS = "http://www.w3.org/2000/svg"
_PALETTE = ("#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22")


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def render_svg(targets: Sequence[Point2], sites: Sequence[Point2], placement: Placement,
               trace: Optional[SimTrace] = None, width_px: int = 640) -> str:
    pts = list(targets) + list(sites)
    if trace is not None:
        pts += [Point2(float(x), float(y)) for x, y in trace.true[:, :2]]
    xmin = min(p.x for p in pts) - 0.5
    xmax = max(p.x for p in pts) + 0.5
    ymin = min(p.y for p in pts) - 0.5
    ymax = max(p.y for p in pts) + 0.5
    scale = width_px / (xmax - xmin)
    height_px = int(math.ceil((ymax - ymin) * scale))

    def sx(x):
        return _fmt((x - xmin) * scale)

    def sy(y):  # flip so +y points up
        return _fmt((ymax - y) * scale)

    ET.register_namespace("", SVG_NS)
    svg = ET.Element(f"{{{SVG_NS}}}svg", {
        "width": str(width_px), "height": str(height_px),
        "viewBox": f"0 0 {width_px} {height_px}",
    })
    ET.SubElement(svg, f"{{{SVG_NS}}}rect",
                  {"x": "0", "y": "0", "width": str(width_px), "height": str(height_px), "fill": "white"})

    g_sites = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "sites", "fill": "#bbbbbb"})
    for p in sites:
        ET.SubElement(g_sites, f"{{{SVG_NS}}}circle", {"cx": sx(p.x), "cy": sy(p.y), "r": "1.5"})

    # chosen intervals drawn as thin strokes offset to the left of each edge
    g_iv = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "intervals", "stroke-width": "2", "opacity": "0.8"})
    for index in sorted(placement.per_edge_intervals):
        frame = edge_frame(targets[index - 1], targets[index])
        for slot, iv in enumerate(placement.per_edge_intervals[index]):
            off = 0.04 * (slot + 1)
            a = frame.to_world(Point2(iv.a, off))
            b = frame.to_world(Point2(iv.b, off))
            ET.SubElement(g_iv, f"{{{SVG_NS}}}line", {
                "x1": sx(a.x), "y1": sy(a.y), "x2": sx(b.x), "y2": sy(b.y),
                "stroke": _PALETTE[slot % len(_PALETTE)],
            })

    ET.SubElement(svg, f"{{{SVG_NS}}}polyline", {
        "id": "path", "fill": "none", "stroke": "black", "stroke-width": "1.5",
        "points": " ".join(f"{sx(p.x)},{sy(p.y)}" for p in targets),
    })
    g_targets = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "targets", "fill": "black"})
    for p in targets:
        ET.SubElement(g_targets, f"{{{SVG_NS}}}rect", {
            "x": _fmt(float(sx(p.x)) - 4), "y": _fmt(float(sy(p.y)) - 4), "width": "8", "height": "8",
        })

    g_lm = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "landmarks", "fill": "#d62728"})
    for sid in placement.sites:
        p = placement.positions[sid]
        ET.SubElement(g_lm, f"{{{SVG_NS}}}polygon", {
            "points": " ".join(f"{_fmt(float(sx(p.x)) + dx)},{_fmt(float(sy(p.y)) + dy)}"
                               for dx, dy in ((0, -6), (5, 4), (-5, 4))),
        })

    if trace is not None:
        for name, arr, colour, dash in (("true", trace.true, "#ff7f0e", None),
                                        ("estimate", trace.estimate, "#1f77b4", "4 3")):
            attrs = {
                "id": f"trajectory-{name}", "fill": "none", "stroke": colour, "stroke-width": "1",
                "points": " ".join(f"{sx(x)},{sy(y)}" for x, y in arr[:, :2]),
            }
            if dash:
                attrs["stroke-dasharray"] = dash
            ET.SubElement(svg, f"{{{SVG_NS}}}polyline", attrs)

    return ET.tostring(svg, encoding="unicode") + "\n"
