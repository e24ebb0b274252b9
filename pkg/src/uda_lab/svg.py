"""Tiny line-chart writer producing standalone SVG (axes, ticks, legend, optional log x)."""

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    out = []
    x = start
    while x <= hi + 1e-12 * abs(hi):
        out.append(round(x, 12))
        x += step
    return out


def line_chart(series, title="", xlabel="", ylabel="", logx=False, width=640, height=420, ylim=None):
    """series: list of (label, xs, ys). Returns SVG text."""
    ml, mr, mt, mb = 60, 150, 36, 48
    pw, ph = width - ml - mr, height - mt - mb
    fx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    pts = [(fx(x), y) for _, xs, ys in series for x, y in zip(xs, ys) if y == y]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    if ylim is None:
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        y0, y1 = ylim
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(v):
        return ml + (fx(v) - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if logx:
        xt = [10**e for e in range(math.floor(x0), math.ceil(x1) + 1)]
        xt += [m * 10**e for e in range(math.floor(x0), math.ceil(x1) + 1) for m in (2, 5)]
        xt = sorted(v for v in xt if x0 - 1e-9 <= math.log10(v) <= x1 + 1e-9)
    else:
        xt = _ticks(x0, x1)
    for v in xt:
        x = sx(v)
        out.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        y = sy(v)
        out.append(f'<line x1="{ml - 5}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        col = PALETTE[i % len(PALETTE)]
        coords = [(sx(x), sy(y)) for x, y in zip(xs, ys) if y == y]
        if len(coords) > 1:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="2"/>')
        for x, y in coords:
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{col}"/>')
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 36}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 42}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(labels, values, title="", ylabel="", width=480, height=360):
    """Single-series bar chart on [0, 1]."""
    ml, mr, mt, mb = 60, 20, 36, 40
    pw, ph = width - ml - mr, height - mt - mb
    n = max(len(labels), 1)
    bw = pw / n * 0.6
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in (0, 0.25, 0.5, 0.75, 1.0):
        y = mt + (1 - v) * ph
        out.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
        out.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" stroke="#ddd"/>')
    for i, (lab, v) in enumerate(zip(labels, values)):
        cx = ml + (i + 0.5) * pw / n
        v = 0.0 if v != v else max(0.0, min(1.0, v))
        out.append(f'<rect x="{cx - bw / 2:.1f}" y="{mt + (1 - v) * ph:.1f}" width="{bw:.1f}" '
                   f'height="{v * ph:.1f}" fill="{PALETTE[i % len(PALETTE)]}"/>')
        out.append(f'<text x="{cx:.1f}" y="{mt + ph + 16}" text-anchor="middle">{escape(str(lab))}</text>')
        out.append(f'<text x="{cx:.1f}" y="{mt + (1 - v) * ph - 4:.1f}" text-anchor="middle">{v:.3f}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
