"""SVG drawings of spring networks.

Bond stroke width encodes stiffness: ``k_min .. k_max`` maps linearly onto
1.5 .. 2.5 display millimetres. Fixed nodes are triangles, input nodes dots
and output nodes stars.
"""
from __future__ import annotations

import numpy as np

from .lattice import Network

WIDTH_RANGE_MM = (1.5, 2.5)


def stroke_widths(net: Network) -> np.ndarray:
    lo, hi = net.k_bounds
    if not np.isfinite(hi) or hi <= lo:
        return np.full(net.n_bonds, 0.5 * sum(WIDTH_RANGE_MM))
    frac = np.clip((net.k - lo) / (hi - lo), 0.0, 1.0)
    return WIDTH_RANGE_MM[0] + frac * (WIDTH_RANGE_MM[1] - WIDTH_RANGE_MM[0])


def _star(cx, cy, r):
    pts = []
    for i in range(10):
        a = np.pi / 2 + i * np.pi / 5
        rr = r if i % 2 == 0 else 0.45 * r
        pts.append(f"{cx + rr * np.cos(a):.3f},{cy - rr * np.sin(a):.3f}")
    return " ".join(pts)


def render_svg(net: Network, inputs=(), outputs=(), scale=1000.0, margin=10.0) -> str:
    """SVG text with one unit = one display millimetre (positions in m times ``scale``)."""
    xy = net.positions * scale
    x0, y0 = xy.min(axis=0) - margin
    x1, y1 = xy.max(axis=0) + margin
    w, h = x1 - x0, y1 - y0

    def px(p):  # flip y so up is up
        return p[0] - x0, y1 - p[1]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3f}mm" height="{h:.3f}mm" '
        f'viewBox="0 0 {w:.3f} {h:.3f}">',
        '<g stroke="#222" stroke-linecap="round">',
    ]
    for (i, j), sw in zip(net.edges, stroke_widths(net)):
        (ax, ay), (bx, by) = px(xy[i]), px(xy[j])
        out.append(f'<line x1="{ax:.3f}" y1="{ay:.3f}" x2="{bx:.3f}" y2="{by:.3f}" stroke-width="{sw:.3f}"/>')
    out.append("</g>")
    r = 2.5
    for n in np.flatnonzero(net.fixed.any(axis=1)):
        cx, cy = px(xy[n])
        out.append(f'<polygon class="fixed" fill="#1f5fbf" points="{cx:.3f},{cy - r:.3f} '
                   f'{cx - r:.3f},{cy + r:.3f} {cx + r:.3f},{cy + r:.3f}"/>')
    for n in inputs:
        cx, cy = px(xy[n])
        out.append(f'<circle class="input" fill="#d62728" cx="{cx:.3f}" cy="{cy:.3f}" r="{0.8 * r:.3f}"/>')
    for n in outputs:
        cx, cy = px(xy[n])
        out.append(f'<polygon class="output" fill="#17becf" points="{_star(cx, cy, 1.3 * r)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
