"""Minimal deterministic SVG rendering of the analysis artifacts.

Hand-rolled on purpose: the output must be byte-identical across runs, so
no timestamps, generator comments or library version strings are emitted.
Figures are either the joint-space square (-pi, pi]^2 with torus side
identification implied, or the workspace half-plane (rho, z).
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .io import fmt

ASPECT_COLORS = ["#9ecae1", "#fdd0a2", "#a1d99b", "#dadaeb", "#fee6ce",
                 "#c7e9c0", "#d9d9d9", "#fdd9b4"]
REGION_COLORS = ["#c6dbef", "#fee0b6", "#c7e9c0", "#e7d4e8", "#f4cae4",
                 "#e6f5c9", "#fff2ae", "#f1e2cc"]
CURVE_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"]


class SvgCanvas:
    def __init__(self, width: int, height: int,
                 xlim: Tuple[float, float], ylim: Tuple[float, float],
                 margin: int = 42):
        self.w, self.h, self.m = width, height, margin
        self.xlim, self.ylim = xlim, ylim
        self.body: List[str] = []

    def _tx(self, x: float) -> float:
        a, b = self.xlim
        return self.m + (x - a) / (b - a) * (self.w - 2 * self.m)

    def _ty(self, y: float) -> float:
        a, b = self.ylim
        return self.h - self.m - (y - a) / (b - a) * (self.h - 2 * self.m)

    def open_group(self, gid: str):
        self.body.append(f'<g id="{gid}">')

    def close_group(self):
        self.body.append("</g>")

    def polyline(self, pts: np.ndarray, color: str, width: float = 1.2,
                 dashed: bool = False, close: bool = False):
        if len(pts) == 0:
            return
        coords = " ".join(f"{self._tx(x):.2f},{self._ty(y):.2f}" for x, y in pts)
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        tag = "polygon" if close else "polyline"
        self.body.append(
            f'<{tag} points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width:.2f}"{dash}/>')

    def circle(self, x: float, y: float, r: float, color: str,
               fill: Optional[str] = None):
        f = fill if fill is not None else color
        self.body.append(
            f'<circle cx="{self._tx(x):.2f}" cy="{self._ty(y):.2f}" '
            f'r="{r:.2f}" fill="{f}" stroke="{color}"/>')

    def rect_data(self, x0: float, y0: float, x1: float, y1: float, color: str):
        xa, xb = self._tx(x0), self._tx(x1)
        ya, yb = self._ty(y1), self._ty(y0)
        self.body.append(
            f'<rect x="{xa:.2f}" y="{ya:.2f}" width="{xb - xa:.2f}" '
            f'height="{yb - ya:.2f}" fill="{color}"/>')

    def text(self, x: float, y: float, s: str, size: int = 12,
             color: str = "#000000", anchor: str = "middle"):
        self.body.append(
            f'<text x="{self._tx(x):.2f}" y="{self._ty(y):.2f}" '
            f'font-family="sans-serif" font-size="{size}" fill="{color}" '
            f'text-anchor="{anchor}">{s}</text>')

    def axes(self, xlabel: str, ylabel: str):
        m, w, h = self.m, self.w, self.h
        self.body.append(
            f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
            'fill="none" stroke="#333333" stroke-width="1"/>')
        self.body.append(
            f'<text x="{w // 2}" y="{h - 8}" font-family="sans-serif" '
            f'font-size="13" text-anchor="middle">{xlabel}</text>')
        self.body.append(
            f'<text x="14" y="{h // 2}" font-family="sans-serif" '
            f'font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 14 {h // 2})">{ylabel}</text>')

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
                f'height="{self.h}" viewBox="0 0 {self.w} {self.h}">')
        return "\n".join([head, *self.body, "</svg>"]) + "\n"


def _raster_runs(canvas: SvgCanvas, labels: np.ndarray, colors: Dict[int, str],
                 x_of, y_of, cell_x: float, cell_y: float):
    """Row-wise run-length rectangles of a labelled raster."""
    n0, n1 = labels.shape
    for i in range(n0):
        j = 0
        while j < n1:
            v = int(labels[i, j])
            j2 = j
            while j2 + 1 < n1 and int(labels[i, j2 + 1]) == v:
                j2 += 1
            if v in colors:
                canvas.rect_data(x_of(i), y_of(j), x_of(i) + cell_x,
                                 y_of(j2) + cell_y, colors[v])
            j = j2 + 1


def joint_space_figure(curves=None, cusp_preimages=None, aspects=None,
                       chains=None, ra_labels=None, qu_cells=None,
                       labels: Optional[List[Tuple[float, float, str]]] = None,
                       size: int = 640) -> str:
    """Joint-space square; overlays whichever layers are given."""
    c = SvgCanvas(size, size, (-math.pi, math.pi), (-math.pi, math.pi))
    if aspects is not None:
        h = aspects.cell_size
        x_of = lambda i: -math.pi + i * h
        colors = {aid: ASPECT_COLORS[(aid - 1) % len(ASPECT_COLORS)]
                  for aid in aspects.aspect_ids}
        c.open_group("aspects")
        _raster_runs(c, aspects.labels, colors, x_of, x_of, h, h)
        c.close_group()
    if ra_labels is not None:
        n = ra_labels.shape[0]
        h = 2 * math.pi / n
        x_of = lambda i: -math.pi + i * h
        colors = {v: REGION_COLORS[(v - 1) % len(REGION_COLORS)]
                  for v in sorted(int(x) for x in np.unique(ra_labels) if x > 0)}
        c.open_group("basic-regions")
        _raster_runs(c, ra_labels, colors, x_of, x_of, h, h)
        c.close_group()
    if qu_cells is not None:
        n, mask = qu_cells
        h = 2 * math.pi / n
        x_of = lambda i: -math.pi + i * h
        c.open_group("uniqueness-domain")
        _raster_runs(c, mask.astype(int), {1: "#a6cee3"}, x_of, x_of, h, h)
        c.close_group()
    if chains is not None:
        c.open_group("characteristic-surfaces")
        for k, ch in enumerate(chains):
            pts = _split_wrapped(np.mod(ch.points + math.pi, 2 * math.pi) - math.pi)
            for block in pts:
                c.polyline(block, "#6a3d9a", 1.4)
        c.close_group()
    if curves is not None:
        c.open_group("singularity-curves")
        for k, curve in enumerate(curves):
            w = curve.wrapped()
            for block in _split_wrapped(w):
                c.polyline(block, CURVE_COLORS[k % len(CURVE_COLORS)], 1.6,
                           dashed=curve.degenerate_image)
            mid = w[len(w) // 2]
            c.text(mid[0], mid[1], curve.label, 12,
                   CURVE_COLORS[k % len(CURVE_COLORS)])
        c.close_group()
    if cusp_preimages:
        c.open_group("cusp-preimages")
        for (t2, t3) in cusp_preimages:
            c.circle(t2, t3, 4.0, "#000000", "#ffff33")
        c.close_group()
    if labels:
        c.open_group("labels")
        for (x, y, s) in labels:
            c.text(x, y, s, 13)
        c.close_group()
    c.axes("theta2 (rad), opposite sides identified",
           "theta3 (rad), opposite sides identified")
    return c.to_string()


def _split_wrapped(pts: np.ndarray, jump: float = math.pi) -> List[np.ndarray]:
    """Cut a wrapped polyline where it jumps across the torus seam."""
    if len(pts) == 0:
        return []
    breaks = np.where(np.abs(np.diff(pts, axis=0)).max(axis=1) > jump)[0]
    blocks = []
    start = 0
    for b in breaks:
        blocks.append(pts[start:b + 1])
        start = b + 1
    blocks.append(pts[start:])
    return [b for b in blocks if len(b) >= 2]


def workspace_figure(p=None, boundary=None, cusps=None, ws_labels=None,
                     ws_grid=None, region_raster=None, slits=None,
                     trace=None, points=None, size: int = 640,
                     xlim=None, ylim=None) -> str:
    """Workspace half-plane (rho, z) with optional layers."""
    if xlim is None or ylim is None:
        from .model import workspace_bounds
        rho_max, z_min, z_max = workspace_bounds(p)
        xlim = (0.0, rho_max)
        ylim = (z_min, z_max)
    c = SvgCanvas(size, size, xlim, ylim)
    if ws_labels is not None and ws_grid is not None:
        g = ws_grid
        x_of = lambda i: i * g.rho_max / g.n
        y_of = lambda j: g.z_min + j * (g.z_max - g.z_min) / g.n
        colors = {v: REGION_COLORS[(v - 1) % len(REGION_COLORS)]
                  for v in sorted(int(x) for x in np.unique(ws_labels) if x > 0)}
        c.open_group("ik-count-regions")
        _raster_runs(c, ws_labels, colors, x_of, y_of,
                     g.rho_max / g.n, (g.z_max - g.z_min) / g.n)
        c.close_group()
    if region_raster is not None and ws_grid is not None:
        g = ws_grid
        x_of = lambda i: i * g.rho_max / g.n
        y_of = lambda j: g.z_min + j * (g.z_max - g.z_min) / g.n
        c.open_group("feasible-region")
        _raster_runs(c, region_raster.astype(int), {1: "#b2df8a"}, x_of, y_of,
                     g.rho_max / g.n, (g.z_max - g.z_min) / g.n)
        c.close_group()
    if boundary is not None:
        c.open_group("boundary")
        for bc in boundary.curves:
            if bc.kind == "degenerate":
                continue
            color = "#d62728" if bc.kind == "internal" else "#1f77b4"
            c.polyline(bc.image, color, 1.6)
        for seg in boundary.segments:
            mid = seg.image_samples[len(seg.image_samples) // 2]
            c.text(mid[0], mid[1], seg.label, 11, "#d62728")
        c.close_group()
    if slits:
        c.open_group("slits")
        for pts in slits:
            c.polyline(pts, "#000000", 2.2, dashed=True)
        c.close_group()
    if trace is not None:
        c.open_group("path-trace")
        c.polyline(trace, "#ff7f00", 1.8)
        c.close_group()
    if cusps:
        c.open_group("cusps")
        for cp in cusps:
            c.circle(cp.rho, cp.z, 4.0, "#000000", "#ffff33")
        c.close_group()
    if points:
        c.open_group("points")
        for (x, y, lbl) in points:
            c.circle(x, y, 3.0, "#000000", "#e31a1c")
            c.text(x, y + 0.03 * (ylim[1] - ylim[0]), lbl, 11)
        c.close_group()
    c.axes("rho", "z")
    return c.to_string()


def atlas_figure(atlas, size: int = 640) -> str:
    d3v, d4v = atlas.d3_vals, atlas.d4_vals
    c = SvgCanvas(size, size, (float(d3v[0]), float(d3v[-1])),
                  (float(d4v[0]), float(d4v[-1])))
    n = len(d3v)
    dx = (d3v[-1] - d3v[0]) / max(n - 1, 1)
    dy = (d4v[-1] - d4v[0]) / max(n - 1, 1)
    x_of = lambda i: float(d3v[0] + (i - 0.5) * dx)
    y_of = lambda j: float(d4v[0] + (j - 0.5) * dy)
    colors = {d.domain_id: REGION_COLORS[(d.domain_id - 1) % len(REGION_COLORS)]
              for d in atlas.table}
    c.open_group("domains")
    _raster_runs(c, atlas.domains, colors, x_of, y_of, dx, dy)
    c.close_group()
    c.open_group("bifurcation-curves")
    for k, (sid, pts) in enumerate(sorted(atlas.curves.items())):
        c.polyline(pts, CURVE_COLORS[k % len(CURVE_COLORS)], 1.6)
        if len(pts):
            mid = pts[len(pts) // 2]
            c.text(mid[0], mid[1], sid, 12, CURVE_COLORS[k % len(CURVE_COLORS)])
    c.close_group()
    c.open_group("domain-labels")
    for d in atlas.table:
        c.text(d.sample[0], d.sample[1],
               f"{d.domain_id}: {d.cusp_count} cusps", 12)
    c.close_group()
    c.axes("d3", "d4")
    return c.to_string()
