"""SVG rendering of accuracy-versus-complexity curves.

Pure text output (no imaging dependencies): accuracy on the [0, 1] vertical
axis against normalized complexity on the [0, 1] horizontal axis, one
polyline per curve, optional shaded min/max envelope band per curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

WIDTH, HEIGHT = 720, 540
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 72, 24, 28, 56

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


@dataclass(frozen=True)
class CurveSeries:
    """One plotted curve: accuracy over a normalized complexity grid."""

    name: str
    x: np.ndarray
    y: np.ndarray
    band_low: np.ndarray | None = None
    band_high: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1 or x.size < 2:
            raise ValidationError(f"curve {self.name!r} needs matching 1-D x/y data")
        has_low, has_high = self.band_low is not None, self.band_high is not None
        if has_low != has_high:
            raise ValidationError(f"curve {self.name!r} has only one band edge")


def _sx(x: float) -> float:
    return MARGIN_LEFT + x * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)


def _sy(y: float) -> float:
    y = min(max(y, 0.0), 1.0)
    return HEIGHT - MARGIN_BOTTOM - y * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)


def _points(xs, ys) -> str:
    return " ".join(f"{_sx(float(x)):.2f},{_sy(float(y)):.2f}" for x, y in zip(xs, ys))


def render_curves_svg(series: list, config: dict | None = None,
                      title: str = "") -> str:
    """Render curves to an SVG document string."""
    if not series:
        raise ValidationError("no curves to plot")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if config is not None:
        parts.append(f"<desc>{escape(json.dumps(config))}</desc>")
    parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')

    # axes box and ticks every 0.2
    x0, x1 = _sx(0.0), _sx(1.0)
    y0, y1 = _sy(0.0), _sy(1.0)
    axis = 'stroke="#333" stroke-width="1"'
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" {axis}/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" {axis}/>')
    for i in range(6):
        v = i / 5
        tx, ty = _sx(v), _sy(v)
        parts.append(f'<line x1="{tx:.2f}" y1="{y0}" x2="{tx:.2f}" y2="{y0 + 5}" {axis}/>')
        parts.append(
            f'<text x="{tx:.2f}" y="{y0 + 20}" font-size="12" text-anchor="middle" '
            f'fill="#333">{v:.1f}</text>'
        )
        parts.append(f'<line x1="{x0 - 5}" y1="{ty:.2f}" x2="{x0}" y2="{ty:.2f}" {axis}/>')
        parts.append(
            f'<text x="{x0 - 9}" y="{ty + 4:.2f}" font-size="12" text-anchor="end" '
            f'fill="#333">{v:.1f}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 14}" font-size="14" '
        f'text-anchor="middle" fill="#333">normalized complexity (d / D)</text>'
    )
    parts.append(
        f'<text x="20" y="{(y0 + y1) / 2:.2f}" font-size="14" text-anchor="middle" '
        f'fill="#333" transform="rotate(-90 20 {(y0 + y1) / 2:.2f})">'
        f'accuracy (1 - loss)</text>'
    )
    if title:
        parts.append(
            f'<text x="{(x0 + x1) / 2:.2f}" y="{MARGIN_TOP - 8}" font-size="15" '
            f'text-anchor="middle" fill="#111">{escape(title)}</text>'
        )

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.band_low is not None:
            ring = _points(s.x, s.band_high) + " " + _points(s.x[::-1], s.band_low[::-1])
            parts.append(f'<polygon points="{ring}" fill="{color}" fill-opacity="0.18"/>')
        parts.append(
            f'<polyline points="{_points(s.x, s.y)}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
        ly = MARGIN_TOP + 16 + 18 * i
        parts.append(
            f'<line x1="{x1 - 150}" y1="{ly - 4}" x2="{x1 - 126}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(
            f'<text x="{x1 - 120}" y="{ly}" font-size="12" fill="#333">'
            f"{escape(s.name)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
