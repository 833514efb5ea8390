"""Minimal self-contained SVG charts.

Hand-written markup keeps the output byte-stable across runs and free of
renderer metadata (timestamps, font caches).
"""

from __future__ import annotations

import math
from html import escape
from typing import Mapping, Sequence

import numpy as np

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _n(x: float) -> str:
    return f"{x:.2f}"


def _num_label(x: float) -> str:
    return f"{x:.3g}"


class _Canvas:
    def __init__(self, title: str, xlabel: str = "", ylabel: str = "", width: int = WIDTH, height: int = HEIGHT):
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        if xlabel:
            self.parts.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
        if ylabel:
            self.parts.append(
                f'<text x="16" y="{height / 2}" text-anchor="middle" '
                f'transform="rotate(-90 16 {height / 2})">{escape(ylabel)}</text>'
            )

    @property
    def plot_w(self) -> float:
        return self.w - LEFT - RIGHT

    @property
    def plot_h(self) -> float:
        return self.h - TOP - BOTTOM

    def frame(self) -> None:
        self.parts.append(
            f'<rect x="{LEFT}" y="{TOP}" width="{_n(self.plot_w)}" height="{_n(self.plot_h)}" '
            'fill="none" stroke="black"/>'
        )

    def yticks(self, lo: float, hi: float, n: int = 5) -> None:
        for k in range(n + 1):
            v = lo + (hi - lo) * k / n
            y = TOP + self.plot_h * (1 - k / n)
            self.parts.append(f'<text x="{LEFT - 6}" y="{_n(y + 4)}" text-anchor="end">{_num_label(v)}</text>')

    def xticks(self, lo: float, hi: float, n: int = 5) -> None:
        for k in range(n + 1):
            v = lo + (hi - lo) * k / n
            x = LEFT + self.plot_w * k / n
            self.parts.append(f'<text x="{_n(x)}" y="{TOP + self.plot_h + 16}" text-anchor="middle">{_num_label(v)}</text>')

    def legend(self, names: Sequence[str]) -> None:
        for k, name in enumerate(names):
            y = TOP + 10 + 14 * k
            color = PALETTE[k % len(PALETTE)]
            self.parts.append(f'<rect x="{self.w - RIGHT - 150}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            self.parts.append(f'<text x="{self.w - RIGHT - 135}" y="{y + 1}">{escape(name)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _span(values: Sequence[float], floor_zero: bool = False) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if floor_zero:
        lo = min(lo, 0.0)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def bar_chart(labels: Sequence[str], series: Mapping[str, Sequence[float]], title: str, xlabel: str = "", ylabel: str = "") -> str:
    canvas = _Canvas(title, xlabel, ylabel)
    canvas.frame()
    names = list(series)
    lo, hi = _span([v for s in series.values() for v in s], floor_zero=True)
    canvas.yticks(lo, hi)
    groups = max(len(labels), 1)
    group_w = canvas.plot_w / groups
    bar_w = group_w * 0.8 / max(len(names), 1)
    for g, label in enumerate(labels):
        x0 = LEFT + g * group_w + group_w * 0.1
        canvas.parts.append(
            f'<text x="{_n(LEFT + (g + 0.5) * group_w)}" y="{TOP + canvas.plot_h + 16}" text-anchor="middle">{escape(label)}</text>'
        )
        for k, name in enumerate(names):
            v = series[name][g]
            if not math.isfinite(v):
                continue
            y = TOP + canvas.plot_h * (1 - (v - lo) / (hi - lo))
            base = TOP + canvas.plot_h * (1 - (0 - lo) / (hi - lo))
            canvas.parts.append(
                f'<rect x="{_n(x0 + k * bar_w)}" y="{_n(min(y, base))}" width="{_n(bar_w)}" '
                f'height="{_n(abs(base - y))}" fill="{PALETTE[k % len(PALETTE)]}"/>'
            )
    canvas.legend(names)
    return canvas.render()


def histograms(edges: Sequence[float], counts: Mapping[str, Sequence[int]], title: str, xlabel: str = "") -> str:
    canvas = _Canvas(title, xlabel, "count")
    canvas.frame()
    edges = list(map(float, edges))
    lo, hi = edges[0], edges[-1]
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    top = max([max(c) if len(c) else 0 for c in counts.values()] + [1])
    canvas.yticks(0, top)
    canvas.xticks(lo, hi)
    for k, (name, series) in enumerate(counts.items()):
        pts = []
        for j, c in enumerate(series):
            a = edges[j] if len(edges) > 1 else lo
            b = edges[j + 1] if len(edges) > 1 else hi
            if b == a:
                a, b = lo, hi
            xa = LEFT + canvas.plot_w * (a - lo) / (hi - lo)
            xb = LEFT + canvas.plot_w * (b - lo) / (hi - lo)
            y = TOP + canvas.plot_h * (1 - c / top)
            pts += [(xa, y), (xb, y)]
        path = " ".join(f"{_n(x)},{_n(y)}" for x, y in pts)
        canvas.parts.append(f'<polyline points="{path}" fill="none" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.5"/>')
    canvas.legend(list(counts))
    return canvas.render()


def _viridis_like(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r = int(68 + t * (253 - 68))
    g = int(1 + t * (231 - 1))
    b = int(84 + t * (37 - 84))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(
    xs: Sequence[float],
    ys: Sequence[float],
    grid: np.ndarray,
    title: str,
    points: Mapping[str, Sequence[Sequence[float]]] | None = None,
    vmax: float | None = None,
) -> str:
    """Cells colored by value; non-finite cells are drawn hatched grey."""
    canvas = _Canvas(title, "x [m]", "y [m]")
    grid = np.asarray(grid, dtype=float)
    finite = grid[np.isfinite(grid)]
    vmin = float(finite.min()) if finite.size else 0.0
    vtop = float(finite.max()) if finite.size else 1.0
    if vmax is not None:
        vtop = min(vtop, vmax)
    span = vtop - vmin or 1.0
    dx = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
    dy = (ys[1] - ys[0]) if len(ys) > 1 else 1.0
    x0, x1 = xs[0] - dx / 2, xs[-1] + dx / 2
    y0, y1 = ys[0] - dy / 2, ys[-1] + dy / 2
    sx = canvas.plot_w / (x1 - x0)
    sy = canvas.plot_h / (y1 - y0)
    for r, y in enumerate(ys):
        for c, x in enumerate(xs):
            v = grid[r, c]
            fill = "#bbbbbb" if not math.isfinite(v) else _viridis_like((v - vmin) / span)
            px = LEFT + (x - dx / 2 - x0) * sx
            py = TOP + (y1 - (y + dy / 2)) * sy
            canvas.parts.append(
                f'<rect x="{_n(px)}" y="{_n(py)}" width="{_n(dx * sx + 0.5)}" height="{_n(dy * sy + 0.5)}" fill="{fill}"/>'
            )
    canvas.frame()
    canvas.xticks(x0, x1)
    canvas.yticks(y0, y1)
    for k, (name, pts) in enumerate((points or {}).items()):
        for p in pts:
            px = LEFT + (p[0] - x0) * sx
            py = TOP + (y1 - p[1]) * sy
            canvas.parts.append(f'<circle cx="{_n(px)}" cy="{_n(py)}" r="4" fill="{PALETTE[(k + 3) % len(PALETTE)]}" stroke="black"/>')
    canvas.parts.append(
        f'<text x="{LEFT}" y="{TOP - 6}">{_num_label(vmin)} .. {_num_label(vtop)}</text>'
    )
    return canvas.render()


def track(
    planned: Sequence[Sequence[float]],
    fixes: Sequence[Sequence[float]],
    title: str,
    nodes: Sequence[Sequence[float]] = (),
) -> str:
    """Planned path (dashed) with solved positions (dots)."""
    canvas = _Canvas(title, "x [m]", "y [m]")
    canvas.frame()
    allpts = [tuple(p) for p in planned] + [tuple(p) for p in fixes] + [tuple(p) for p in nodes]
    xlo, xhi = _span([p[0] for p in allpts])
    ylo, yhi = _span([p[1] for p in allpts])
    pad = 0.05 * max(xhi - xlo, yhi - ylo)
    xlo, xhi, ylo, yhi = xlo - pad, xhi + pad, ylo - pad, yhi + pad
    scale = min(canvas.plot_w / (xhi - xlo), canvas.plot_h / (yhi - ylo))

    def to_px(p) -> tuple[float, float]:
        return LEFT + (p[0] - xlo) * scale, TOP + canvas.plot_h - (p[1] - ylo) * scale

    canvas.xticks(xlo, xlo + canvas.plot_w / scale)
    canvas.yticks(yhi - canvas.plot_h / scale, yhi)
    if planned:
        path = " ".join("{},{}".format(*map(_n, to_px(p))) for p in planned)
        canvas.parts.append(f'<polyline points="{path}" fill="none" stroke="green" stroke-dasharray="6,4" stroke-width="1.5"/>')
    for p in fixes:
        x, y = to_px(p)
        canvas.parts.append(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="1.5" fill="{PALETTE[0]}"/>')
    for p in nodes:
        x, y = to_px(p)
        canvas.parts.append(f'<rect x="{_n(x - 4)}" y="{_n(y - 4)}" width="8" height="8" fill="{PALETTE[3]}"/>')
    return canvas.render()
