"""Built-in SVG plots: mass profiles, density profiles and curve overlays."""

from __future__ import annotations

import logging
from typing import Sequence
import xml.etree.ElementTree as ET

import numpy as np

from .ambient import AmbientDomain
from .const import MODE_BODY_3D
from .geometry import boundary_loops
from .sweepout import Slice

_LOGGER = logging.getLogger(__name__)

WIDTH = 640
HEIGHT = 420
MARGIN = 56
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def _svg(title: str) -> ET.Element:
    root = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(root, "rect", width=str(WIDTH), height=str(HEIGHT), fill="white")
    text = ET.SubElement(root, "text", x=str(WIDTH // 2), y="24", attrib={"text-anchor": "middle", "font-size": "15"})
    text.text = title
    return root


def _tostring(root: ET.Element) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


class _Axes:
    """Affine map from data coordinates to the plot box."""

    def __init__(self, x: np.ndarray, y: np.ndarray, equal: bool = False) -> None:
        x0, x1 = float(np.min(x)), float(np.max(x))
        y0, y1 = float(np.min(y)), float(np.max(y))
        if x1 - x0 < 1e-12:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.04 * (y1 - y0)
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0 - pad, y1 + pad
        self.sx = (WIDTH - 2 * MARGIN) / (self.x1 - self.x0)
        self.sy = (HEIGHT - 2 * MARGIN) / (self.y1 - self.y0)
        if equal:
            self.sx = self.sy = min(self.sx, self.sy)

    def map(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        return (
            MARGIN + (np.asarray(x, dtype=float) - self.x0) * self.sx,
            HEIGHT - MARGIN - (np.asarray(y, dtype=float) - self.y0) * self.sy,
        )

    def points(self, x: np.ndarray, y: np.ndarray) -> str:
        px, py = self.map(x, y)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    def frame(self, root: ET.Element, xlabel: str, ylabel: str) -> None:
        ET.SubElement(
            root,
            "rect",
            x=str(MARGIN),
            y=str(MARGIN),
            width=str(WIDTH - 2 * MARGIN),
            height=str(HEIGHT - 2 * MARGIN),
            fill="none",
            stroke="#444",
        )
        for value, anchor, x, y in (
            (self.x0, "start", MARGIN, HEIGHT - MARGIN + 16),
            (self.x1, "end", WIDTH - MARGIN, HEIGHT - MARGIN + 16),
        ):
            ET.SubElement(root, "text", x=str(x), y=str(y), attrib={"text-anchor": anchor, "font-size": "11"}).text = f"{value:.4g}"
        for value, y in ((self.y0, HEIGHT - MARGIN), (self.y1, MARGIN + 10)):
            ET.SubElement(root, "text", x=str(MARGIN - 4), y=str(y), attrib={"text-anchor": "end", "font-size": "11"}).text = f"{value:.4g}"
        ET.SubElement(root, "text", x=str(WIDTH // 2), y=str(HEIGHT - 12), attrib={"text-anchor": "middle", "font-size": "12"}).text = xlabel
        ET.SubElement(
            root,
            "text",
            x="14",
            y=str(HEIGHT // 2),
            transform=f"rotate(-90 14 {HEIGHT // 2})",
            attrib={"text-anchor": "middle", "font-size": "12"},
        ).text = ylabel


def _legend(root: ET.Element, labels: Sequence[str]) -> None:
    for i, label in enumerate(labels):
        y = MARGIN + 14 + 16 * i
        color = COLORS[i % len(COLORS)]
        ET.SubElement(root, "line", x1=str(WIDTH - MARGIN - 130), y1=str(y - 4), x2=str(WIDTH - MARGIN - 110), y2=str(y - 4), stroke=color)
        ET.SubElement(root, "text", x=str(WIDTH - MARGIN - 104), y=str(y), attrib={"font-size": "11"}).text = label


def line_plot(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str = "t",
    ylabel: str = "mass",
    log_x: bool = False,
) -> str:
    """Return an SVG line plot of named (x, y) series."""
    root = _svg(title)
    data = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_x:
            keep &= x > 0.0
            x = np.log10(np.where(keep, x, 1.0))
        data[label] = (x[keep], y[keep])
    non_empty = [v for v in data.values() if len(v[0])]
    if not non_empty:
        _LOGGER.warning("Plot %r has no finite data", title)
        return _tostring(root)
    axes = _Axes(np.concatenate([v[0] for v in non_empty]), np.concatenate([v[1] for v in non_empty]))
    axes.frame(root, f"log10 {xlabel}" if log_x else xlabel, ylabel)
    for i, (label, (x, y)) in enumerate(data.items()):
        ET.SubElement(
            root,
            "polyline",
            points=axes.points(x, y),
            fill="none",
            stroke=COLORS[i % len(COLORS)],
            attrib={"stroke-width": "1.5"},
        )
    if len(data) > 1:
        _legend(root, list(data))
    return _tostring(root)


def _planar_view(slice_: Slice) -> list[np.ndarray]:
    """Return the polylines drawn for a slice; meshes are cut to their (r, z) profile or boundary loops."""
    if slice_.is_trivial:
        return [slice_.vertices[:, [0, -1]]]
    if not slice_.is_mesh:
        verts = slice_.vertices
        return [np.vstack([verts, verts[:1]]) if slice_.closed else verts]
    if slice_.profile is not None:
        profile = np.asarray(slice_.profile)
        return [profile, profile * np.array([-1.0, 1.0])]
    loops = boundary_loops(slice_.faces)
    return [slice_.vertices[np.append(loop, loop[0])][:, [0, 2]] for loop in loops] or [slice_.vertices[:1, [0, 2]]]


def curve_overlay(domain: AmbientDomain, slices: dict[str, Slice], title: str) -> str:
    """Return an SVG of slices drawn over the domain boundary (x-z section in 3-D)."""
    root = _svg(title)
    if domain.mode == MODE_BODY_3D:
        theta = np.linspace(0.0, 2.0 * np.pi, 257)
        a = domain.boundary.semi_axes
        c = domain.boundary.center
        outline = np.column_stack([c[0] + a[0] * np.cos(theta), c[2] + a[2] * np.sin(theta)])
    else:
        _, outline = domain.boundary.samples(512)
        outline = np.vstack([outline, outline[:1]])
    views = {label: _planar_view(s) for label, s in slices.items()}
    allpts = np.vstack([outline] + [p for lines in views.values() for p in lines])
    axes = _Axes(allpts[:, 0], allpts[:, 1], equal=True)
    axes.frame(root, "x", "z" if domain.mode == MODE_BODY_3D else "y")
    ET.SubElement(root, "polyline", points=axes.points(outline[:, 0], outline[:, 1]), fill="none", stroke="#888")
    for i, (label, lines) in enumerate(views.items()):
        for line in lines:
            ET.SubElement(
                root,
                "polyline",
                points=axes.points(line[:, 0], line[:, 1]),
                fill="none",
                stroke=COLORS[i % len(COLORS)],
                attrib={"stroke-width": "1.5"},
            )
    if not domain.gamma.is_empty:
        marks = domain.gamma.samples(64)
        px, py = axes.map(marks[:, 0], marks[:, -1])
        for x, y in zip(px, py):
            ET.SubElement(root, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="2.5", fill="black")
    _legend(root, list(slices))
    return _tostring(root)


def csv_plot(rows: list[dict], title: str) -> str:
    """Plot every numeric column of CSV rows against the first column."""
    if not rows:
        return line_plot({}, title)
    keys = list(rows[0])
    xkey = keys[0]
    x = [row[xkey] for row in rows]
    series = {}
    for key in keys[1:]:
        values = [row[key] for row in rows]
        if all(isinstance(v, float) for v in values):
            series[key] = (x, values)
    return line_plot(series, title, xlabel=xkey, ylabel=", ".join(series) or "value")
