"""Aligned plot-data tables and bare-bones SVG line charts."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .classify import SeriesRecord

MISSING = "?"


def merge_series(records: list[SeriesRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Union time grid and a (n_times, n_series) value table, NaN where a series
    has no value."""
    if not records:
        raise ValueError("no series to merge")
    grid = np.unique(np.concatenate([r.times for r in records]))
    table = np.full((grid.shape[0], len(records)), np.nan)
    for j, r in enumerate(records):
        table[np.searchsorted(grid, r.times), j] = r.values
    return grid, table


def write_plotdata(records: list[SeriesRecord], path) -> None:
    """Whitespace-separated columns t, series1, series2, ...; missing cells are
    written as '?' (use ``set datafile missing '?'`` in gnuplot)."""
    grid, table = merge_series(records)
    names = [r.label or f"series{j + 1}" for j, r in enumerate(records)]
    lines = ["# t " + " ".join(n.replace(" ", "_") for n in names)]
    for t, row in zip(grid.tolist(), table.tolist()):
        cells = [MISSING if np.isnan(v) else repr(v) for v in row]
        lines.append(" ".join([repr(t)] + cells))
    Path(path).write_text("\n".join(lines) + "\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg(records: list[SeriesRecord], path, width: int = 640, height: int = 400) -> None:
    grid, table = merge_series(records)
    finite = table[np.isfinite(table)]
    x0, x1 = float(grid[0]), float(grid[-1])
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 40

    def sx(x):
        return pad + (width - 2 * pad) * (x - x0) / (x1 - x0)

    def sy(y):
        return height - pad - (height - 2 * pad) * (y - y0) / (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#888"/>',
        f'<text x="{pad}" y="{height - 10}" font-size="11">t: {x0:.4g} .. {x1:.4g}</text>',
        f'<text x="{pad}" y="{pad - 10}" font-size="11">value: {y0:.4g} .. {y1:.4g}</text>',
    ]
    for j, r in enumerate(records):
        col = _COLORS[j % len(_COLORS)]
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(r.times.tolist(), r.values.tolist())
                       if np.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 150}" y="{pad + 15 + 14 * j}" font-size="11" fill="{col}">'
                   f"{r.label or f'series{j + 1}'}</text>")
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
