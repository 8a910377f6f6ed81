"""Report bundles: JSON results, CSV tables and SVG heatmaps written to disk.

Everything except ``timing.json`` is a deterministic function of the inputs
and seeds, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["ReportBundle", "dumps", "heatmap_svg", "provenance"]


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def provenance(seeds: dict) -> dict:
    import scipy

    return {
        "package": "unitdemand",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seeds": seeds,
    }


_LOW = np.array([255, 237, 160])  # pale yellow for probability 0
_HIGH = np.array([128, 0, 38])  # dark red for probability 1


def _colour(v: float) -> str:
    v = min(max(float(v), 0.0), 1.0)
    r, g, b = np.rint(_LOW + (_HIGH - _LOW) * v).astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(matrix, xs, ys, title: str = "", cell: int = 8) -> str:
    """A self-contained SVG raster of ``matrix`` (rows are ``ys``, bottom row first on screen bottom)."""
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = matrix.shape
    pad_left, pad_top, pad_bottom = 48, 24, 28
    width = pad_left + cols * cell + 12
    height = pad_top + rows * cell + pad_bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{pad_left}" y="16" font-family="sans-serif" font-size="12">{title}</text>',
    ]
    for i in range(rows):
        y = pad_top + (rows - 1 - i) * cell
        for j in range(cols):
            x = pad_left + j * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_colour(matrix[i, j])}"/>')
    base = pad_top + rows * cell
    parts.append(f'<text x="{pad_left}" y="{base + 16}" font-family="sans-serif" font-size="10">{xs[0]:.3g}</text>')
    parts.append(f'<text x="{pad_left + cols * cell}" y="{base + 16}" font-family="sans-serif" font-size="10" '
                 f'text-anchor="end">{xs[-1]:.3g}</text>')
    parts.append(f'<text x="{pad_left - 4}" y="{base}" font-family="sans-serif" font-size="10" '
                 f'text-anchor="end">{ys[0]:.3g}</text>')
    parts.append(f'<text x="{pad_left - 4}" y="{pad_top + 8}" font-family="sans-serif" font-size="10" '
                 f'text-anchor="end">{ys[-1]:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass
class ReportBundle:
    command: str
    inputs: dict
    results: dict
    tables: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def write(self, outdir) -> list:
        """Write every artifact under ``outdir`` and return the relative paths."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "input.json": dumps(self.inputs),
            "results.json": dumps(self.results),
            "provenance.json": dumps(self.provenance),
            "timing.json": dumps(self.timing),
        }
        for name, text in self.tables.items():
            files[f"tables/{name}.csv"] = text
        for name, text in self.figures.items():
            files[f"figures/{name}.svg"] = text
        for rel, text in sorted(files.items()):
            path = out / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        return sorted(files)
