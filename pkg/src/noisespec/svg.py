"""Minimal dependency-free SVG rendering of loss curves and confusion heatmaps.

The CSV files are the primary plot-data interface; these renderings are an
optional convenience (``--svg``).
"""

from __future__ import annotations

import numpy as np

_W, _H, _PAD = 640, 400, 50


def _header():
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{_H}" viewBox="0 0 {_W} {_H}">'
            f'<rect width="{_W}" height="{_H}" fill="white"/>')


def line_chart(xs, ys, title: str, x_label: str, y_label: str,
               log_y: bool = False) -> str:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if log_y:
        ys = np.log10(np.maximum(ys, 1e-300))
        y_label = f"log10 {y_label}"
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    w, h = _W - 2 * _PAD, _H - 2 * _PAD

    def px(x):
        return _PAD + (x - x0) / (x1 - x0) * w

    def py(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * h

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts = [
        _header(),
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{w}" height="{h}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" font-size="15">{title}</text>',
        f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{_H / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2:.0f})">{y_label}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 16}" font-size="11">{x0:g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="end" font-size="11">{x1:g}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end" font-size="11">{y0:.3g}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD + 6}" text-anchor="end" font-size="11">{y1:.3g}</text>',
        "</svg>",
    ]
    return "".join(parts)


def heatmap(matrix, title: str, axis_label: str = "class") -> str:
    m = np.asarray(matrix, dtype=float)
    n_rows, n_cols = m.shape
    w, h = _W - 2 * _PAD, _H - 2 * _PAD
    cw, ch = w / n_cols, h / n_rows
    lo, hi = float(m.min()), float(m.max())
    span = hi - lo if hi > lo else 1.0
    parts = [_header(),
             f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" font-size="15">{title}</text>']
    for i in range(n_rows):
        for j in range(n_cols):
            frac = (m[i, j] - lo) / span
            r = int(255 * (1 - frac))
            color = f"rgb({r},{int(255 - 120 * frac)},255)"
            x, y = _PAD + j * cw, _PAD + i * ch
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw:.1f}" '
                         f'height="{ch:.1f}" fill="{color}" stroke="black"/>')
            parts.append(f'<text x="{x + cw / 2:.1f}" y="{y + ch / 2 + 5:.1f}" '
                         f'text-anchor="middle" font-size="14">{m[i, j]:.3g}</text>')
    for j in range(n_cols):
        parts.append(f'<text x="{_PAD + (j + 0.5) * cw:.1f}" y="{_H - _PAD + 18}" '
                     f'text-anchor="middle" font-size="12">pred {j}</text>')
    for i in range(n_rows):
        parts.append(f'<text x="{_PAD - 6}" y="{_PAD + (i + 0.5) * ch + 4:.1f}" '
                     f'text-anchor="end" font-size="12">true {i}</text>')
    parts.append(f'<text x="{_W / 2:.0f}" y="{_H - 8}" text-anchor="middle" '
                 f'font-size="12">{axis_label}</text></svg>')
    return "".join(parts)
