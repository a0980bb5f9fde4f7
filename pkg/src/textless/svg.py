"""Standalone SVG line charts (no plotting dependency)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False,
               width=640, height=400) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document string."""
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v, log):
        return math.log10(v) if log else v

    pts = {}
    for label, (xs, ys) in series.items():
        keep = [(tx(x, logx), tx(y, logy)) for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y)
                and (not logx or x > 0) and (not logy or y > 0)]
        pts[label] = keep
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    def fmt(v, log):
        return f"{10 ** v:.3g}" if log else f"{v:.3g}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for v in _ticks(x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{mt + ph + 16}" text-anchor="middle">'
                   f'{fmt(v, logx)}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{fmt(v, logy)}</text>')
    for i, (label, p) in enumerate(pts.items()):
        color = _COLORS[i % len(_COLORS)]
        if p:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 14 * i}" fill="{color}">{escape(str(label))}</text>')
    out.append(f'<text x="{width / 2}" y="{mt - 10}" text-anchor="middle" font-size="13">'
               f'{escape(title)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
