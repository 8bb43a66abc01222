"""SVG rendering of a trace: positions over time, the final Voronoi
partition and each cell's inscribed circle.

Colours: initial positions black, intermediate red, final blue, Voronoi
cells blue, inscribed circles black.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .dynamics import Trace
from .geometry import Circle, ConvexRegion, chebyshev_center, voronoi_cells

SIZE = 480.0
PAD = 16.0


@dataclass
class Figure:
    svg: str
    cells: list[ConvexRegion]
    circles: list[Circle]


class _Frame:
    def __init__(self, q: ConvexRegion):
        x0, y0, x1, y1 = q.bbox
        self.x0, self.y1 = x0, y1
        self.scale = (SIZE - 2 * PAD) / max(x1 - x0, y1 - y0)

    def __call__(self, p) -> tuple[float, float]:
        return PAD + (p[0] - self.x0) * self.scale, PAD + (self.y1 - p[1]) * self.scale


def _polygon(frame: _Frame, q: ConvexRegion, cls: str, stroke: str, width: float) -> str:
    pts = " ".join("%.3f,%.3f" % frame(v) for v in q.vertices)
    return f'<polygon class="{cls}" points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'


def _dot(frame: _Frame, p, cls: str, colour: str, r: float) -> str:
    x, y = frame(p)
    return f'<circle class="{cls}" cx="{x:.3f}" cy="{y:.3f}" r="{r}" fill="{colour}"/>'


def render_trace(trace: Trace, q: ConvexRegion, title: str | None = None, max_intermediate: int = 4000) -> Figure:
    if not trace.records:
        raise ValueError("cannot render an empty trace")
    frame = _Frame(q)
    final = np.asarray(trace.final.positions)
    cells = voronoi_cells(final, q)
    circles = [chebyshev_center(c) for c in cells]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE:.0f}" height="{SIZE:.0f}" '
        f'viewBox="0 0 {SIZE:.0f} {SIZE:.0f}">'
    ]
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts.append('<rect width="100%" height="100%" fill="white"/>')
    parts.append(_polygon(frame, q, "region", "black", 1.5))

    mids = trace.records[1:-1]
    stride = max(1, len(mids) * len(final) // max_intermediate)
    parts.append('<g class="intermediate">')
    for rec in mids[::stride]:
        for p in rec.positions:
            parts.append(_dot(frame, p, "pos-mid", "red", 1.0))
    parts.append("</g>")

    parts.append('<g class="voronoi">')
    for cell in cells:
        parts.append(_polygon(frame, cell, "cell", "blue", 1.0))
    parts.append("</g>")
    parts.append('<g class="inscribed">')
    for c in circles:
        x, y = frame(c.center)
        parts.append(
            f'<circle class="inscribed-circle" cx="{x:.3f}" cy="{y:.3f}" r="{c.radius * frame.scale:.3f}" '
            f'fill="none" stroke="black" stroke-width="1"/>'
        )
    parts.append("</g>")
    parts.append('<g class="initial">')
    for p in trace.initial.positions:
        parts.append(_dot(frame, p, "pos-initial", "black", 3.0))
    parts.append("</g>")
    parts.append('<g class="final">')
    for p in final:
        parts.append(_dot(frame, p, "pos-final", "blue", 3.0))
    parts.append("</g>")
    cost = trace.final.social_cost
    parts.append(
        f'<text x="{PAD}" y="{SIZE - 3:.0f}" font-size="11" font-family="sans-serif" '
        f'data-social-cost={quoteattr(repr(cost))}>n={trace.final.n} C={cost:.4f}</text>'
    )
    parts.append("</svg>")
    return Figure("\n".join(parts) + "\n", cells, circles)
