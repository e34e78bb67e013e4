"""
Minimal static SVG charts for benchmark results.
"""

from html import escape
import math
from pathlib import Path
import sys
from typing import Dict, List, Sequence, Tuple

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

WIDTH = 640
HEIGHT = 400
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def _fmt(value: float) -> str:
    return f"{value:.4g}"


def _scale(lo: float, hi: float, size: float, flip: bool):
    if not hi > lo:
        hi = lo + 1.0
    span = hi - lo

    def to_px(value):
        frac = (value - lo) / span
        if flip:
            return MARGIN + (1.0 - frac) * (size - 2 * MARGIN)
        return MARGIN + frac * (size - 2 * MARGIN)

    return to_px


def _frame(title: str, x_label: str, y_label: str) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">{escape(y_label)}</text>',
    ]


def _y_ticks(lo: float, hi: float, to_y) -> List[str]:
    parts = []
    for k in range(5):
        value = lo + (hi - lo) * k / 4
        y = to_y(value)
        parts.append(
            f'<text x="{MARGIN - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(value)}</text>'
        )
    return parts


def line_chart(
    series: Dict[str, Sequence[Tuple[float, float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> str:
    """
    Line chart with one polyline per series.

    Inputs:
     - series (dict): label -> [(x, y), ...]; non-finite points are dropped.

    Returns:
     - SVG document text
    """
    points = {
        label: [(float(x), float(y)) for x, y in values if math.isfinite(x) and math.isfinite(y)]
        for label, values in series.items()
    }
    xs = [x for values in points.values() for x, _ in values] or [0.0]
    ys = [y for values in points.values() for _, y in values] or [0.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(0.0, min(ys)), max(ys)
    to_x = _scale(x_lo, x_hi, WIDTH, flip=False)
    to_y = _scale(y_lo, y_hi if y_hi > y_lo else y_lo + 1.0, HEIGHT, flip=True)

    parts = _frame(title, x_label, y_label)
    parts += _y_ticks(y_lo, y_hi if y_hi > y_lo else y_lo + 1.0, to_y)
    for k, value in enumerate((x_lo, x_hi)):
        anchor = "start" if k == 0 else "end"
        parts.append(
            f'<text x="{to_x(value):.1f}" y="{HEIGHT - MARGIN + 16}" '
            f'text-anchor="{anchor}">{_fmt(value)}</text>'
        )
    for k, (label, values) in enumerate(sorted(points.items())):
        color = PALETTE[k % len(PALETTE)]
        if values:
            coords = " ".join(f"{to_x(x):.1f},{to_y(y):.1f}" for x, y in values)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * k}" fill="{color}">'
            f"{escape(label)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(
    labels: Sequence[str],
    values: Sequence[float],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> str:
    """Vertical bar chart, one bar per label."""
    heights = [float(v) if math.isfinite(float(v)) else 0.0 for v in values]
    top = max(heights + [0.0]) or 1.0
    to_y = _scale(0.0, top, HEIGHT, flip=True)
    slot = (WIDTH - 2 * MARGIN) / max(1, len(labels))

    parts = _frame(title, x_label, y_label)
    parts += _y_ticks(0.0, top, to_y)
    for k, (label, height) in enumerate(zip(labels, heights)):
        x = MARGIN + k * slot + slot * 0.15
        y = to_y(height)
        parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{slot * 0.7:.1f}" '
            f'height="{HEIGHT - MARGIN - y:.1f}" fill="{PALETTE[0]}"/>'
        )
        parts.append(
            f'<text x="{x + slot * 0.35:.1f}" y="{HEIGHT - MARGIN + 16}" '
            f'text-anchor="middle">{escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(svg: str, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(svg, encoding="utf-8")
