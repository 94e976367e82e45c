"""Minimal SVG line charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 480, height: int = 320, logx: bool = False) -> str:
    """``series`` maps a label to ``(xs, ys)``; returns the SVG document as text."""
    pad = 50
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    fx = (lambda x: math.log10(x)) if logx else (lambda x: x)
    x0, x1 = min(map(fx, xs_all)), max(map(fx, xs_all))
    y0, y1 = min(0.0, min(ys_all)), max(ys_all)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return pad + (fx(x) - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">'
        f"{escape(xlabel)}</text>",
        f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height / 2})">{escape(ylabel)}</text>',
        f'<text x="{pad - 4}" y="{py(y1) + 4:.1f}" text-anchor="end" font-size="10">{y1:.3g}</text>',
        f'<text x="{pad - 4}" y="{py(y0) + 4:.1f}" text-anchor="end" font-size="10">{y0:.3g}</text>',
    ]
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        out.append(
            f'<text x="{width - pad}" y="{pad + 14 * i}" text-anchor="end" font-size="11" '
            f'fill="{color}">{escape(str(label))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
