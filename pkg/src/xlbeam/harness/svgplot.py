"""Minimal static SVG line plots: batch results only, no plotting stack.

Output is plain polylines with fixed formatting, so plots are
byte-reproducible alongside the CSVs they visualize.
"""

from __future__ import annotations

import math
from pathlib import Path

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 30, 45


def _finite(vals):
    return [v for v in vals if v is not None and math.isfinite(v)]


def svg_line_plot(path, series: dict[str, tuple[list, list]], title: str = "",
                  xlabel: str = "", ylabel: str = "") -> None:
    """Write one SVG with a polyline per named series.

    ``series`` maps a label to (x values, y values); non-finite points
    break the line.
    """
    xs = [x for sx, _ in series.values() for x in _finite(sx)]
    ys = [y for _, sy in series.values() for y in _finite(sy)]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * plot_w

    def py(y):
        return MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
           'fill="none" stroke="#888"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{title}</text>')
    if xlabel:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12" '
                   f'transform="rotate(-90 15 {HEIGHT / 2:.1f})">{ylabel}</text>')
    # axis ticks: 5 per axis
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{px(xv):.1f}" y="{HEIGHT - MARGIN_B + 15}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="10">'
                   f'{xv:.3g}</text>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{py(yv) + 3:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{yv:.3g}</text>')
    for idx, (label, (sx, sy)) in enumerate(sorted(series.items())):
        color = PALETTE[idx % len(PALETTE)]
        pts = []
        segments = []
        for x, y in zip(sx, sy):
            if y is None or not math.isfinite(y):
                if pts:
                    segments.append(pts)
                pts = []
                continue
            pts.append(f"{px(x):.2f},{py(y):.2f}")
        if pts:
            segments.append(pts)
        for seg in segments:
            out.append(f'<polyline points="{" ".join(seg)}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - MARGIN_R - 6}" y="{MARGIN_T + 16 + 14 * idx}" '
                   f'text-anchor="end" font-family="sans-serif" font-size="11" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
