"""Dependency-free SVG line chart for cumulative-regret curves."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=30, bottom=50)
MAX_POINTS = 2000


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1) if lo <= e <= hi]
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + step / 2, step))


def regret_svg(curves: dict[str, np.ndarray], loglog: bool = False, title: str = "Cumulative regret") -> str:
    """Render ``{label: cumulative regret}`` curves; x is the 1-based episode index."""
    if not curves:
        raise ValueError("nothing to plot")
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    prepared = {}
    for label, cum in curves.items():
        y = np.asarray(cum, dtype=float)
        x = np.arange(1, len(y) + 1, dtype=float)
        if loglog:
            keep = y > 0
            x, y = np.log10(x[keep]), np.log10(y[keep])
        if len(x) > MAX_POINTS:
            idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
            x, y = x[idx], y[idx]
        prepared[label] = (x, y)
    xs = np.concatenate([p[0] for p in prepared.values()])
    ys = np.concatenate([p[1] for p in prepared.values()])
    if not len(xs):
        raise ValueError("no positive values to plot on log axes")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if loglog else (0.0, float(ys.max()))
    x1, y1 = (x1 if x1 > x0 else x0 + 1), (y1 if y1 > y0 else y0 + 1)

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    def label_of(v):
        return f"1e{int(round(v))}" if loglog else f"{v:g}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, loglog):
        t = math.log10(t) if loglog else t
        out.append(f'<text x="{px(t):.1f}" y="{HEIGHT - 30}" text-anchor="middle" font-family="sans-serif" font-size="11">{label_of(t)}</text>')
    for t in _ticks(y0, y1, loglog):
        t = math.log10(t) if loglog else t
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(t) + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{label_of(t)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-family="sans-serif" font-size="12">episode</text>')
    for i, (label, (x, y)) in enumerate(prepared.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 16 + 16 * i
        out.append(f'<text x="{MARGIN["left"] + 10}" y="{ly}" fill="{color}" font-family="sans-serif" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
