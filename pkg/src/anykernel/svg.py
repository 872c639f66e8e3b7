"""Minimal SVG line charts on log-log axes."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _log_range(values):
    positive = [v for v in values if v > 0 and math.isfinite(v)]
    if not positive:
        return 0.0, 1.0
    lo, hi = math.floor(math.log10(min(positive))), math.ceil(math.log10(max(positive)))
    return float(lo), float(max(hi, lo + 1))


def loglog_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str,
                 xlabel: str = "round t", ylabel: str = "|OI error|") -> str:
    """Render (label, xs, ys) series; nonpositive points are dropped."""
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    x0, x1 = _log_range(all_x)
    y0, y1 = _log_range(all_y)
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (math.log10(x) - x0) / (x1 - x0) * plot_w

    def py(y):
        return HEIGHT - MARGIN - (math.log10(y) - y0) / (y1 - y0) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    for k in range(int(x0), int(x1) + 1):
        x = px(10.0 ** k)
        parts.append(f'<line x1="{x:.1f}" y1="{HEIGHT - MARGIN}" x2="{x:.1f}" y2="{MARGIN}" stroke="#ddd"/>')
        parts.append(f'<text x="{x:.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">1e{k}</text>')
    for k in range(int(y0), int(y1) + 1):
        y = py(10.0 ** k)
        parts.append(f'<line x1="{MARGIN}" y1="{y:.1f}" x2="{WIDTH - MARGIN}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN - 6}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">1e{k}</text>')
    parts.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>')
    for index, (label, xs, ys) in enumerate(series):
        color = COLORS[index % len(COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(y)]
        if pts:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = MARGIN + 16 + 16 * index
        parts.append(f'<line x1="{MARGIN + 10}" y1="{ly - 4}" x2="{MARGIN + 30}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{MARGIN + 36}" y="{ly}" font-family="sans-serif" font-size="12">'
                     f'{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def thin(xs: Sequence[float], ys: Sequence[float], points: int = 400):
    """Keep about ``points`` log-spaced samples so large runs stay small on disk."""
    n = len(xs)
    if n <= points:
        return list(xs), list(ys)
    idx = sorted({min(n - 1, int(round(10 ** (k * math.log10(n) / (points - 1)))) - 1)
                  for k in range(points)} | {n - 1})
    idx = [i for i in idx if i >= 0]
    return [xs[i] for i in idx], [ys[i] for i in idx]
