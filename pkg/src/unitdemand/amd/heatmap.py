"""Allocation maps over two free coordinates, and the sale boundary they imply."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import DomainError
from .lp import LpSolution
from .menu import MenuMechanism

__all__ = ["Heatmap", "allocation_heatmap", "sale_boundary"]


@dataclass(frozen=True)
class Heatmap:
    """``matrix[i, j]`` is the allocation at ``x = xs[j]``, ``y = ys[i]``."""

    item: Optional[int]
    free: tuple
    xs: np.ndarray
    ys: np.ndarray
    fixed: dict
    matrix: np.ndarray
    sold: np.ndarray
    top_value: np.ndarray

    def to_csv(self) -> str:
        head = "y\\x," + ",".join(f"{x:.6g}" for x in self.xs)
        lines = [head]
        for y, row in zip(self.ys, self.matrix):
            lines.append(f"{y:.6g}," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"


def _slice_points(n, free, fixed, xs, ys):
    X, Y = np.meshgrid(xs, ys)
    pts = np.empty(X.shape + (n,))
    pts[..., free[0]] = X
    pts[..., free[1]] = Y
    for k, v in fixed.items():
        pts[..., k] = v
    return pts.reshape(-1, n), X.shape


def _normalize_slice(n, slice_):
    fixed = {int(k): float(v) for k, v in (slice_ or {}).items()}
    free = tuple(k for k in range(n) if k not in fixed)
    if len(free) != 2 or any(k < 0 or k >= n for k in fixed):
        raise DomainError(f"slice must fix all but two of the {n} coordinates")
    return free, fixed


def allocation_heatmap(solution: Union[LpSolution, MenuMechanism], item: Optional[int] = None,
                       slice: Optional[dict] = None, axes: Optional[Sequence[np.ndarray]] = None) -> Heatmap:
    """Allocation probability of ``item`` (or of any item when ``None``) on a 2-D slice.

    Parameters
    ----------
    solution : LpSolution or MenuMechanism
        For an LP solution the grid of the solve is used; zero-probability
        grid points, which the LP ignores, get the outcome of the LP's menu.
    item : int, optional
        Item index; ``None`` sums over items.
    slice : dict, optional
        ``{coordinate: value}`` for every coordinate but two.  For an LP
        solution the value must be a grid value.
    axes : pair of arrays
        Evaluation points of the two free coordinates; required for menus.
    """
    n = solution.n
    if item is not None and not (0 <= item < n):
        raise DomainError(f"item {item} out of range")
    free, fixed = _normalize_slice(n, slice)
    if isinstance(solution, LpSolution):
        grid = solution.grid
        if grid is None or grid.axes is None:
            raise DomainError("LP heatmaps need a product grid")
        for k, v in fixed.items():
            if np.min(np.abs(grid.axes[k] - v)) > 1e-9 * max(1.0, abs(v)):
                raise DomainError(f"slice value {v} is not on the grid of coordinate {k}")
            fixed[k] = float(grid.axes[k][np.argmin(np.abs(grid.axes[k] - v))])
        xs, ys = grid.axes[free[0]], grid.axes[free[1]]
        pts, shape = _slice_points(n, free, fixed, xs, ys)
        menu = solution.to_menu()
        alloc = menu.allocation(pts)
        lookup = {tuple(np.round(t, 12)): a for t, a in zip(solution.types, solution.allocation)}
        for r, t in enumerate(pts):
            hit = lookup.get(tuple(np.round(t, 12)))
            if hit is not None:
                alloc[r] = hit
    else:
        if axes is None:
            raise DomainError("menu heatmaps need evaluation axes")
        xs, ys = (np.asarray(a, dtype=float) for a in axes)
        pts, shape = _slice_points(n, free, fixed, xs, ys)
        alloc = solution.allocation(pts)
    values = alloc.sum(axis=1) if item is None else alloc[:, item]
    sold = alloc.sum(axis=1) > 0.5
    return Heatmap(item, free, np.asarray(xs), np.asarray(ys), fixed, values.reshape(shape),
                   sold.reshape(shape), pts.max(axis=1).reshape(shape))


def sale_boundary(maps: Sequence[Heatmap]) -> dict:
    """Best single price threshold separating sold from unsold grid points.

    Fits ``sold == (max(t) >= tau)`` over every point of every map and
    returns the ``tau`` with the fewest mismatches (midpoint between
    neighbouring distinct values of ``max(t)``).
    """
    top = np.concatenate([m.top_value.ravel() for m in maps])
    sold = np.concatenate([m.sold.ravel() for m in maps])
    order = np.argsort(top, kind="stable")
    top, sold = top[order], sold[order]
    levels = np.unique(top)
    # mismatches for tau just above levels[k-1]: sold below + unsold at/above
    sold_below = np.concatenate([[0], np.cumsum(np.bincount(np.searchsorted(levels, top), weights=sold,
                                                            minlength=len(levels)))])
    total_unsold = np.cumsum(np.bincount(np.searchsorted(levels, top), weights=~sold, minlength=len(levels)))
    unsold_at_or_above = np.concatenate([[0], total_unsold])
    unsold_at_or_above = total_unsold[-1] - unsold_at_or_above
    errors = sold_below + unsold_at_or_above
    k = int(np.argmin(errors))
    if k == 0:
        tau = float(levels[0])
    elif k == len(levels):
        tau = float(levels[-1])
    else:
        tau = float(0.5 * (levels[k - 1] + levels[k]))
    return {"price": tau, "mismatches": int(errors[k]), "points": int(len(top))}
