"""Hand-emitted SVG density scatter of self-assessed vs predicted scores."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evaluation import SCORE_RANGES

N_BINS = 25
WIDTH = 420
HEIGHT = 420
MARGIN = 56

# viridis anchor colors, interpolated linearly
_PALETTE = np.array(
    [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ],
    dtype=np.float64,
)


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_PALETTE) - 1)
    i = min(int(t), len(_PALETTE) - 2)
    rgb = _PALETTE[i] + (t - i) * (_PALETTE[i + 1] - _PALETTE[i])
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def point_density(truth, pred, lo: float, hi: float, bins: int = N_BINS) -> np.ndarray:
    """Count of points sharing each point's cell in a bins x bins grid over [lo, hi]^2."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    edges = np.linspace(lo, hi, bins + 1)
    counts, _, _ = np.histogram2d(np.clip(truth, lo, hi), np.clip(pred, lo, hi), bins=[edges, edges])
    ix = np.clip(np.searchsorted(edges, truth, side="right") - 1, 0, bins - 1)
    iy = np.clip(np.searchsorted(edges, pred, side="right") - 1, 0, bins - 1)
    return counts[ix, iy]


def density_scatter_svg(pairs, measurement: str, title: str | None = None) -> str:
    lo, hi = SCORE_RANGES[measurement]
    truth = np.array([p[0] for p in pairs], dtype=np.float64)
    pred = np.array([p[1] for p in pairs], dtype=np.float64)
    density = point_density(truth, pred, lo, hi) if len(pairs) else np.zeros(0)
    top = density.max() if density.size else 1.0
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + (min(max(v, lo), hi) - lo) / (hi - lo) * plot_w

    def sy(v):
        return HEIGHT - MARGIN - (min(max(v, lo), hi) - lo) / (hi - lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000000"/>',
        f'<line x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" stroke="#999999" stroke-dasharray="4 3"/>',
    ]
    for v in np.linspace(lo, hi, 5):
        out.append(f'<line x1="{sx(v):.2f}" y1="{HEIGHT - MARGIN}" x2="{sx(v):.2f}" y2="{HEIGHT - MARGIN + 5}" stroke="#000000"/>')
        out.append(
            f'<text x="{sx(v):.2f}" y="{HEIGHT - MARGIN + 18}" font-size="11" text-anchor="middle">{v:g}</text>'
        )
        out.append(f'<line x1="{MARGIN - 5}" y1="{sy(v):.2f}" x2="{MARGIN}" y2="{sy(v):.2f}" stroke="#000000"/>')
        out.append(
            f'<text x="{MARGIN - 8}" y="{sy(v) + 4:.2f}" font-size="11" text-anchor="end">{v:g}</text>'
        )
    out.append(
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 14}" font-size="13" text-anchor="middle">self-assessed {measurement}</text>'
    )
    out.append(
        f'<text x="16" y="{HEIGHT / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">predicted {measurement}</text>'
    )
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="28" font-size="14" text-anchor="middle">{title}</text>')
    # densest points drawn last so they stay visible
    for i in np.argsort(density, kind="stable"):
        out.append(
            f'<circle cx="{sx(truth[i]):.2f}" cy="{sy(pred[i]):.2f}" r="3" fill="{_color(density[i] / top)}" fill-opacity="0.85"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_scatter(pairs, measurement: str, path: str | Path, title: str | None = None) -> None:
    Path(path).write_text(density_scatter_svg(pairs, measurement, title), encoding="utf-8")
