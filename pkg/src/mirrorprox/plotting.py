"""Minimal SVG line chart with a logarithmic y axis."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=200, top=30, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf")


def _nice_ticks(lo, hi, count=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(v)
        v += step
    return ticks


def _fmt_tick(v):
    return f"{v:g}"


def line_chart_svg(series, title="", xlabel="iteration", ylabel="dual gap"):
    """Render ``series`` as an SVG document string.

    Parameters
    ----------
    series : list of dict
        Each item has ``label``, ``x``, ``y`` and optionally ``dashed``.
        Points with ``y <= 0`` or non-finite values are skipped.
    """
    pts = []
    for s in series:
        pts.append([(float(x), float(y)) for x, y in zip(s["x"], s["y"])
                    if math.isfinite(float(y)) and float(y) > 0 and math.isfinite(float(x))])
    allpts = [p for ps in pts for p in ps]
    if allpts:
        xmin = min(p[0] for p in allpts)
        xmax = max(p[0] for p in allpts)
        ymin = math.floor(math.log10(min(p[1] for p in allpts)))
        ymax = math.ceil(math.log10(max(p[1] for p in allpts)))
    else:
        xmin, xmax, ymin, ymax = 0.0, 1.0, -1, 0
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1

    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(x):
        return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0)

    def sy(y):
        return y0 + (math.log10(y) - ymin) / (ymax - ymin) * (y1 - y0)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="18" text-anchor="middle">'
                   f'{escape(title)}</text>')
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               f'fill="none" stroke="black"/>')
    for e in range(ymin, ymax + 1):
        py = sy(10.0 ** e)
        out.append(f'<line x1="{x0}" y1="{py:.2f}" x2="{x1}" y2="{py:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{py + 4:.2f}" text-anchor="end">1e{e}</text>')
    for t in _nice_ticks(xmin, xmax):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(20,{(y0 + y1) / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')

    for i, (s, ps) in enumerate(zip(series, pts)):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.get("dashed") else ""
        if ps:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in ps)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                       f'points="{coords}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        out.append(f'<line x1="{x1 + 12}" y1="{ly}" x2="{x1 + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x1 + 46}" y="{ly + 4}">{escape(s["label"])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
