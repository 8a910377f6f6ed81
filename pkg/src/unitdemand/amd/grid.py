"""Finite type spaces for the mechanism-design solvers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..distributions import Cdf
from ..errors import DomainError, InternalInvariantError

__all__ = ["GridProblem", "build_grid"]


@dataclass(frozen=True)
class GridProblem:
    """Types ``t`` with probabilities ``weights``.

    ``axes`` holds the per-item values when the types form a product grid
    (``types`` then enumerates it in row-major order) and is ``None`` for an
    arbitrary type list.
    """

    n: int
    types: np.ndarray
    weights: np.ndarray
    axes: Optional[tuple] = None
    placement: str = "custom"

    def __post_init__(self):
        t = np.asarray(self.types, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.ndim != 2 or t.shape[1] != self.n or w.shape != (t.shape[0],):
            raise DomainError("types must be (m, n) and weights (m,)")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InternalInvariantError("grid weights must be nonnegative and sum to 1")
        if self.axes is not None:
            for ax in self.axes:
                if np.any(np.diff(ax) <= 0):
                    raise InternalInvariantError("grid axes must be strictly increasing")
        object.__setattr__(self, "types", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_types(cls, types, weights=None) -> "GridProblem":
        t = np.atleast_2d(np.asarray(types, dtype=float))
        w = np.full(len(t), 1.0 / len(t)) if weights is None else np.asarray(weights, dtype=float)
        return cls(t.shape[1], t, w / w.sum())

    @property
    def shape(self) -> tuple:
        if self.axes is None:
            return (len(self.types),)
        return tuple(len(ax) for ax in self.axes)

    @property
    def size(self) -> int:
        return len(self.types)

    def support_mask(self) -> np.ndarray:
        return self.weights > 0


def _axis(dist: Cdf, resolution: int, placement: str):
    lo, hi = dist.support_lo, dist.support_hi
    if placement == "center":
        edges = lo + (hi - lo) * np.arange(resolution + 1) / resolution
        pts = 0.5 * (edges[:-1] + edges[1:])
        mass = np.diff(dist.F(edges))
    elif placement == "left":
        pts = lo + (hi - lo) * np.arange(resolution) / (resolution - 1)
        mass = np.append(np.diff(dist.F(pts)), 0.0)
    else:
        raise DomainError(f"unknown placement {placement!r}")
    mass = np.clip(mass, 0.0, None)
    return pts, mass / mass.sum()


def build_grid(dists: Sequence[Cdf], resolution: int, placement: str = "center") -> GridProblem:
    """Product grid over independent items.

    Parameters
    ----------
    dists : sequence of Cdf
        One distribution per item.
    resolution : int
        Points per axis.
    placement : {"center", "left"}
        ``center`` puts one point in the middle of each of ``resolution``
        equal cells, carrying the cell's probability.  ``left`` puts points
        on both support ends and gives each point the mass of the cell to its
        right, so the top point carries none.  The left rule never lets a
        posted price capture a whole cell of mass above its true value,
        which removes the first-order upward bias of the centered rule.
    """
    if resolution < (2 if placement == "left" else 1):
        raise DomainError(f"resolution {resolution} too small for {placement!r} placement")
    dists = list(dists)
    for d in dists:
        if not d.support_hi > d.support_lo:
            raise DomainError("degenerate support")
    axes, masses = zip(*[_axis(d, resolution, placement) for d in dists])
    types = np.array(list(itertools.product(*axes)), dtype=float)
    weights = np.array([np.prod(m) for m in itertools.product(*masses)], dtype=float)
    weights = weights / weights.sum()
    return GridProblem(len(dists), types, weights, tuple(np.asarray(a) for a in axes), placement)
