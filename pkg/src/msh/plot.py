"""Static SVG scatter of labeled points with the fitted lines or circles."""

import numpy as np

from .geometry import ModelKind

__all__ = ["render_svg", "write_svg"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#17becf", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f"]
_OUTLIER = "#b0b0b0"


def _color(label):
    return _OUTLIER if label == 0 else _PALETTE[(label - 1) % len(_PALETTE)]


def _clip_line(a, b, c, lo, hi):
    """Endpoints of ``a x + b y + c = 0`` inside the box ``[lo, hi]``."""
    pts = []
    if abs(b) > 1e-12:
        for x in (lo[0], hi[0]):
            y = -(a * x + c) / b
            if lo[1] <= y <= hi[1]:
                pts.append((x, y))
    if abs(a) > 1e-12:
        for y in (lo[1], hi[1]):
            x = -(b * y + c) / a
            if lo[0] <= x <= hi[0]:
                pts.append((x, y))
    return pts[:2] if len(pts) >= 2 else None


def render_svg(points, labels, kind, modes=(), size=600, margin=20):
    """SVG document as a string.

    Only the first two coordinates are drawn (the first view for
    correspondences, the xy-projection for 3D points).  Model overlays are
    drawn for 2D lines and circles.
    """
    kind = ModelKind.parse(kind)
    P = np.asarray(points, dtype=float)[:, :2]
    labels = np.asarray(labels, dtype=int)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    s = (size - 2 * margin) / span

    def tx(x, y):
        return margin + (x - lo[0]) * s, size - margin - (y - lo[1]) * s

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for (x, y), lab in zip(P, labels):
        u, v = tx(x, y)
        out.append(f'<circle cx="{u:.2f}" cy="{v:.2f}" r="2" fill="{_color(lab)}"/>')
    for k, m in enumerate(modes, start=1):
        col = _color(k)
        if kind is ModelKind.LINE2D:
            seg = _clip_line(*m.theta, lo, hi)
            if seg:
                (x0, y0), (x1, y1) = tx(*seg[0]), tx(*seg[1])
                out.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                           f'stroke="{col}" stroke-width="1.5"/>')
        elif kind is ModelKind.CIRCLE2D:
            cx, cy, r = m.theta
            u, v = tx(cx, cy)
            out.append(f'<circle cx="{u:.2f}" cy="{v:.2f}" r="{r * s:.2f}" fill="none" '
                       f'stroke="{col}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, points, labels, kind, modes=()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(points, labels, kind, modes))
