"""Static SVG line and bar charts.

Output depends only on the input numbers, so files are byte-stable across
runs. Coordinates are printed with a fixed precision.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 150, "top": 40, "bottom": 50}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _limits(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo < 1e-300:
        pad = abs(hi) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Frame:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x: float) -> float:
        span = self.x1 - self.x0 or 1.0
        return MARGIN["left"] + (x - self.x0) / span * self.pw

    def py(self, y: float) -> float:
        span = self.y1 - self.y0 or 1.0
        return MARGIN["top"] + (1.0 - (y - self.y0) / span) * self.ph


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _axes(frame: _Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    left, top = MARGIN["left"], MARGIN["top"]
    bottom = top + frame.ph
    right = left + frame.pw
    out = [
        f'<rect x="{left}" y="{top}" width="{frame.pw}" height="{frame.ph}" fill="none" stroke="#000"/>',
        f'<text x="{(left + right) / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(frame.y0, frame.y1):
        y = frame.py(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for v in _ticks(frame.x0, frame.x1):
        x = frame.px(v)
        out.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 4}" stroke="#000"/>')
        out.append(f'<text x="{x:.2f}" y="{bottom + 16}" text-anchor="middle" font-size="10">{v:.4g}</text>')
    return out


def _legend(labels: list[str]) -> list[str]:
    out = []
    x = WIDTH - MARGIN["right"] + 12
    for i, label in enumerate(labels):
        y = MARGIN["top"] + 12 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 8}" width="12" height="10" fill="{color}"/>')
        out.append(f'<text x="{x + 18}" y="{y + 1}" font-size="11">{escape(label)}</text>')
    return out


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>', *body, "</svg>"]) + "\n"


def line_chart(series: dict[str, tuple], title: str, xlabel: str, ylabel: str) -> str:
    """``series`` maps label -> (x, y); NaN points break the polyline."""
    if not series:
        raise ValueError("line_chart needs at least one series")
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    frame = _Frame(_limits(xs) if xs.size > 1 else (0.0, 1.0), _limits(ys))
    body = _axes(frame, title, xlabel, ylabel)
    for i, (label, (x, y)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        points: list[str] = []
        segments = []
        for xv, yv in zip(x, y):
            if math.isfinite(xv) and math.isfinite(yv):
                points.append(f"{frame.px(xv):.2f},{frame.py(yv):.2f}")
            elif points:
                segments.append(points)
                points = []
        if points:
            segments.append(points)
        for seg in segments:
            body.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}">'
                f"<title>{escape(label)}</title></polyline>"
            )
    body += _legend(list(series))
    return _document(body)


def bar_chart(x, groups: dict[str, np.ndarray], title: str, xlabel: str, ylabel: str) -> str:
    """Grouped bars, one group per label, all sharing the categories ``x``."""
    x = np.asarray(x, dtype=float)
    if not groups or x.size == 0:
        raise ValueError("bar_chart needs categories and at least one group")
    values = np.concatenate([np.asarray(v, dtype=float) for v in groups.values()])
    top = float(values.max()) if values.size else 1.0
    frame = _Frame((float(x.min()) - 0.5, float(x.max()) + 0.5), (0.0, top * 1.05 or 1.0))
    body = _axes(frame, title, xlabel, ylabel)
    slot = frame.pw / max(x.size, 1)
    width = slot / (len(groups) + 0.5)
    base = frame.py(0.0)
    for i, (label, v) in enumerate(groups.items()):
        color = PALETTE[i % len(PALETTE)]
        for xv, yv in zip(x, v):
            left = frame.px(xv) - slot / 2 + 0.25 * width + i * width
            h = base - frame.py(yv)
            body.append(f'<rect x="{left:.2f}" y="{base - h:.2f}" width="{width:.2f}" height="{h:.2f}" fill="{color}"/>')
    body += _legend(list(groups))
    return _document(body)
