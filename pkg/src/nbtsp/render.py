"""Static SVG pictures of tours and of simulation snapshots."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ValidationError

SVG_NS = "http://www.w3.org/2000/svg"


@dataclass(frozen=True)
class RenderSpec:
    width: int = 600
    height: int = 600
    margin: float = 20.0
    city_radius: float = 3.0
    city_fill: str = "#1f3b73"
    tour_stroke: str = "#c0392b"
    tour_width: float = 1.5
    inner_stroke: str = "#27ae60"
    outer_stroke: str = "#333333"
    wall_width: float = 1.0
    bubble_stroke: str = "#e67e22"
    stride: int = 1

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise DomainError("render width and height must be positive")
        if self.stride < 1:
            raise DomainError("render stride must be at least 1")
        if not 0 <= 2 * self.margin < min(self.width, self.height):
            raise DomainError("margin leaves no room to draw")


class _Frame:
    """Maps a world box onto the canvas with uniform scale and y pointing up."""

    def __init__(self, spec, lo, hi):
        span = np.maximum(np.asarray(hi, float) - np.asarray(lo, float), 1e-12)
        room = np.array([spec.width, spec.height]) - 2 * spec.margin
        self.scale = float(np.min(room / span))
        used = span * self.scale
        self.off = spec.margin + (room - used) / 2
        self.lo = np.asarray(lo, float)
        self.height = spec.height

    def xy(self, p):
        x, y = (np.asarray(p, float) - self.lo) * self.scale + self.off
        return float(x), float(self.height - y)

    def length(self, r):
        return float(r) * self.scale


def _svg(spec):
    ET.register_namespace("", SVG_NS)
    return ET.Element("svg", {
        "xmlns": SVG_NS, "version": "1.1",
        "width": str(spec.width), "height": str(spec.height),
        "viewBox": f"0 0 {spec.width} {spec.height}",
    })


def _num(v):
    if not math.isfinite(v):
        raise ValidationError(f"cannot render non-finite coordinate {v!r}")
    return f"{v:.3f}"


def _circle(parent, frame, center, r, cls, stroke, width, fill="none"):
    x, y = frame.xy(center)
    ET.SubElement(parent, "circle", {
        "class": cls, "cx": _num(x), "cy": _num(y), "r": _num(frame.length(r)),
        "fill": fill, "stroke": stroke, "stroke-width": str(width),
    })


def _to_text(root):
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


def render_tour(inst, tour, spec: RenderSpec = RenderSpec(), title=None) -> str:
    """Cities as dots joined by the closed tour, in the instance's own coordinates."""
    order = list(tour.order)
    if len(order) != inst.n or sorted(order) != list(range(inst.n)):
        raise ValidationError(f"tour of length {len(order)} does not fit {inst.n} cities")
    pts = inst.cities
    frame = _Frame(spec, pts.min(axis=0), pts.max(axis=0))
    root = _svg(spec)
    if title:
        ET.SubElement(root, "title").text = title
    coords = [frame.xy(pts[i]) for i in order]
    d = "M " + " L ".join(f"{_num(x)} {_num(y)}" for x, y in coords) + " Z"
    ET.SubElement(root, "path", {
        "class": "tour", "d": d, "fill": "none",
        "stroke": spec.tour_stroke, "stroke-width": str(spec.tour_width),
    })
    for p in pts:
        x, y = frame.xy(p)
        ET.SubElement(root, "circle", {
            "class": "city", "cx": _num(x), "cy": _num(y),
            "r": str(spec.city_radius), "fill": spec.city_fill,
        })
    return _to_text(root)


def render_snapshot(snap, spec: RenderSpec = RenderSpec()) -> str:
    """Particles, both walls and any bubbles for one snapshot (normalised coordinates)."""
    pos = np.asarray(snap.positions, float)
    if snap.r_inner > snap.r_outer:
        raise ValidationError(f"inner wall {snap.r_inner} lies outside outer wall {snap.r_outer}")
    extent = max(snap.r_outer, float(np.max(np.abs(pos))) if len(pos) else 0.0)
    frame = _Frame(spec, (-extent, -extent), (extent, extent))
    root = _svg(spec)
    ET.SubElement(root, "title").text = f"step {snap.step}"
    _circle(root, frame, (0, 0), snap.r_outer, "outer-wall", spec.outer_stroke, spec.wall_width)
    _circle(root, frame, (0, 0), snap.r_inner, "inner-wall", spec.inner_stroke, spec.wall_width)
    for center, radius in snap.bubbles:
        _circle(root, frame, center, radius, "bubble", spec.bubble_stroke, spec.wall_width)
    for p in pos:
        x, y = frame.xy(p)
        ET.SubElement(root, "circle", {
            "class": "particle", "cx": _num(x), "cy": _num(y),
            "r": str(spec.city_radius), "fill": spec.city_fill,
        })
    return _to_text(root)


def render_trace(trace, spec: RenderSpec = RenderSpec(), n=None) -> list:
    """One SVG per ``spec.stride`` snapshots, starting with the first."""
    if not trace:
        raise ValidationError("trace has no snapshots")
    sizes = {len(s.positions) for s in trace}
    if len(sizes) != 1 or (n is not None and sizes != {n}):
        raise ValidationError(f"snapshot sizes {sorted(sizes)} do not match {n or 'each other'}")
    return [render_snapshot(s, spec) for s in trace[::spec.stride]]


def write_trace_svgs(trace, directory, spec: RenderSpec = RenderSpec(), prefix="frame", n=None):
    """Write the frames of :func:`render_trace`; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    docs = render_trace(trace, spec, n)
    selected = trace[::spec.stride]
    paths = []
    for snap, doc in zip(selected, docs):
        path = directory / f"{prefix}_{snap.step:08d}.svg"
        path.write_text(doc)
        paths.append(path)
    return paths
