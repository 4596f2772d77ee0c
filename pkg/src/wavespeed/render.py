"""Plot files for sweep results without a plotting library: PGM, SVG, CSV."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .sweep import DEFAULT_LEVELS, ContourSet, SpeedGrid, SweepResult, extract_contours, write_matrix_csv

# dark (most negative) to light (zero), roughly the usual perceptual ramp
_PALETTE = [
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
]


def gray_levels(speeds: np.ndarray) -> np.ndarray:
    """Map [min, 0] linearly onto [0, 255]; zero is white, the minimum black.

    Positive values clip to 255; NaN cells are returned as -1.
    """
    finite = np.isfinite(speeds)
    if not finite.any():
        raise ValueError("no finite cells")
    lo = min(float(np.min(speeds[finite])), 0.0)
    out = np.full(speeds.shape, -1, dtype=int)
    if lo == 0.0:
        out[finite] = 255
        return out
    scaled = 255.0 * (np.clip(speeds[finite], lo, 0.0) - lo) / (0.0 - lo)
    out[finite] = np.floor(scaled + 0.5).astype(int)
    return out


def pgm_bytes(result: SweepResult | SpeedGrid) -> bytes:
    """Binary PGM; rows run from the largest k (top) to the smallest, columns along d."""
    g = gray_levels(result.speeds)[::-1]
    g = np.where(g < 0, 255, g).astype(np.uint8)  # failed cells render as unknown (white)
    h, w = g.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + g.tobytes()


def _colour(t: float) -> str:
    for (t0, c0), (t1, c1) in zip(_PALETTE, _PALETTE[1:]):
        if t <= t1:
            s = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = [round(a + s * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % _PALETTE[-1][1]


def svg_text(result: SweepResult | SpeedGrid, contours: ContourSet | None = None, cell_px: int = 8) -> str:
    """Coloured cells in the (d, k) plane with level-set polylines on top."""
    s = result.speeds
    finite = np.isfinite(s)
    if not finite.any():
        raise ValueError("no finite cells")
    lo = min(float(np.min(s[finite])), 0.0)
    d, k = result.d_values, result.k_values
    nk, nd = s.shape
    margin = 40
    legend = 60
    width = nd * cell_px + 2 * margin + legend
    height = nk * cell_px + 2 * margin
    dd = (d[-1] - d[0]) / max(nd - 1, 1) or 1.0
    dk = (k[-1] - k[0]) / max(nk - 1, 1) or 1.0

    def px(dv: float, kv: float) -> tuple[float, float]:
        x = margin + ((dv - d[0]) / dd + 0.5) * cell_px
        y = margin + (nk - 0.5 - (kv - k[0]) / dk) * cell_px
        return x, y

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        '<g id="cells" shape-rendering="crispEdges">',
    ]
    for i in range(nk):
        for j in range(nd):
            x = margin + j * cell_px
            y = margin + (nk - 1 - i) * cell_px
            if finite[i, j]:
                t = 1.0 if lo == 0 else (min(s[i, j], 0.0) - lo) / (0.0 - lo)
                fill = _colour(t)
            else:
                fill = "#ffffff"
            out.append(f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" fill="{fill}"/>')
    out.append("</g>")
    if contours is not None:
        out.append('<g id="contours" fill="none">')
        for level in contours.levels:
            zero = abs(level) < 1e-12
            style = 'stroke="#ffffff" stroke-width="1.5" stroke-dasharray="4,3"' if zero else 'stroke="#000000" stroke-width="0.8"'
            for chain in contours.polylines[float(level)]:
                pts = " ".join("%.2f,%.2f" % px(a, b) for a, b in chain)
                out.append(f'<polyline data-level="{level:g}" points="{pts}" {style}/>')
        out.append("</g>")
    # axes labels and colour bar
    x_mid = margin + nd * cell_px / 2
    y_mid = margin + nk * cell_px / 2
    out.append(f'<text x="{x_mid:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">d</text>')
    out.append(f'<text x="12" y="{y_mid:.1f}" text-anchor="middle" font-size="12">k</text>')
    for dv in (d[0], d[-1]):
        x, _ = px(dv, k[0])
        out.append(f'<text x="{x:.1f}" y="{margin + nk * cell_px + 14}" text-anchor="middle" font-size="10">{dv:g}</text>')
    for kv in (k[0], k[-1]):
        _, y = px(d[0], kv)
        out.append(f'<text x="{margin - 4}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{kv:g}</text>')
    bar_x = margin + nd * cell_px + 15
    bar_h = nk * cell_px
    steps = 50
    for q in range(steps):
        t = 1.0 - q / (steps - 1)
        y = margin + q * bar_h / steps
        out.append(f'<rect x="{bar_x}" y="{y:.2f}" width="12" height="{bar_h / steps + 0.5:.2f}" fill="{_colour(t)}"/>')
    out.append(f'<text x="{bar_x + 16}" y="{margin + 8}" font-size="10">0</text>')
    out.append(f'<text x="{bar_x + 16}" y="{margin + bar_h}" font-size="10">{lo:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_heatmap(result: SweepResult | SpeedGrid, fmt: str, path: str | Path, contours: ContourSet | None = None) -> Path:
    """Write ``result`` as ``pgm``, ``svg`` or ``csv``; identical inputs give identical bytes."""
    path = Path(path)
    if fmt == "pgm":
        path.write_bytes(pgm_bytes(result))
    elif fmt == "svg":
        if contours is None:
            contours = extract_contours(result, DEFAULT_LEVELS)
        path.write_text(svg_text(result, contours))
    elif fmt == "csv":
        if not np.isfinite(result.speeds).any():
            raise ValueError("no finite cells")
        write_matrix_csv(path, result.d_values, result.k_values,
                         [[repr(float(v)) for v in row] for row in result.speeds])
    else:
        raise ValueError(f"unsupported heat map format {fmt!r}; use pgm, svg or csv")
    return path
