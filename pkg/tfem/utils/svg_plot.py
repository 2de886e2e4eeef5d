"""
tfem/utils/svg_plot.py
Minimal SVG line plots: one polyline per series with a +-std band.
"""

import logging
import os
from xml.sax.saxutils import escape

import numpy as np

from tfem.errors import ArtifactIOError

logger = logging.getLogger(__name__)

WIDTH, HEIGHT, MARGIN = 640, 400, 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, dtype=np.float64) - lo) / span * (out_hi - out_lo)


def render_line_plot(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """
    Args:
        series: name -> (xs, means, stds), arrays of equal length

    Returns:
        the SVG document
    """
    xs_all = np.concatenate([np.asarray(s[0], dtype=np.float64) for s in series.values()] or [np.zeros(1)])
    lows = [np.asarray(m) - np.asarray(s) for _, m, s in series.values()]
    highs = [np.asarray(m) + np.asarray(s) for _, m, s in series.values()]
    y_lo = float(np.min(np.concatenate(lows))) if lows else 0.0
    y_hi = float(np.max(np.concatenate(highs))) if highs else 1.0
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())

    def px(x):
        return _scale(x, x_lo, x_hi, MARGIN, WIDTH - MARGIN)

    def py(y):
        return _scale(y, y_lo, y_hi, HEIGHT - MARGIN, MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{MARGIN / 2:.1f}" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x_lo:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" text-anchor="end" font-size="10">{x_hi:.4g}</text>',
        f'<text x="{MARGIN - 5}" y="{HEIGHT - MARGIN}" text-anchor="end" font-size="10">{y_lo:.4g}</text>',
        f'<text x="{MARGIN - 5}" y="{MARGIN}" text-anchor="end" font-size="10">{y_hi:.4g}</text>',
    ]
    for index, (name, (xs, means, stds)) in enumerate(series.items()):
        color = PALETTE[index % len(PALETTE)]
        xs, means, stds = (np.asarray(a, dtype=np.float64) for a in (xs, means, stds))
        upper = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs), py(means + stds))]
        lower = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs[::-1]), py((means - stds)[::-1]))]
        line = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs), py(means))]
        parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        parts.append(f'<polyline points="{" ".join(line)}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{WIDTH - MARGIN + 5}" y="{MARGIN + 15 * index}" font-size="11" fill="{color}">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_line_plot(path: str, series: dict, title: str, xlabel: str, ylabel: str) -> str:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as f:
            f.write(render_line_plot(series, title, xlabel, ylabel))
    except OSError as e:
        raise ArtifactIOError(f"cannot write plot {path}: {e}")
    logger.info("wrote %s", path)
    return path
