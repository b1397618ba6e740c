"""Minimal self-contained SVG line charts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class SvgChart:
    series: dict = field(default_factory=dict)  # name -> (xs, ys)
    xlabel: str = "x"
    ylabel: str = "y"
    title: str = ""
    width: int = 640
    height: int = 420

    def add(self, name, xs, ys):
        xs = [float(x) for x in xs]
        ys = [float(y) for y in ys]
        if len(xs) != len(ys):
            raise ValueError("x and y must have equal length")
        if not all(math.isfinite(v) for v in xs + ys):
            raise ValueError(f"series {name!r} has non-finite coordinates")
        self.series[name] = (xs, ys)
        return self

    def render(self) -> str:
        pts = [p for xs, ys in self.series.values() for p in zip(xs, ys)]
        if not pts:
            raise ValueError("chart has no points")
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0
        left, right, top, bottom = 70, 130, 40, 50
        pw, ph = self.width - left - right, self.height - top - bottom

        def sx(x):
            return left + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return top + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" font-family="sans-serif" font-size="12">',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
            f'<text x="{self.width / 2:.1f}" y="20" text-anchor="middle">{escape(self.title)}</text>',
            f'<text x="{left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle">'
            f"{escape(self.xlabel)}</text>",
            f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 15 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>',
        ]
        for i in range(5):
            fx = x0 + (x1 - x0) * i / 4
            fy = y0 + (y1 - y0) * i / 4
            out.append(f'<text x="{sx(fx):.1f}" y="{top + ph + 16}" text-anchor="middle">{fx:.3g}</text>')
            out.append(f'<text x="{left - 6}" y="{sy(fy) + 4:.1f}" text-anchor="end">{fy:.3g}</text>')
        for k, (name, (xs, ys)) in enumerate(self.series.items()):
            colour = PALETTE[k % len(PALETTE)]
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{path}"/>')
            ly = top + 16 * (k + 1)
            out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                       f'stroke="{colour}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(str(name))}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
