"""Gauss-Legendre building blocks shared by the revenue and dual checks.

Everything here is tensor-product Gauss-Legendre on panels whose edges are
placed at known kinks of the integrand, so piecewise polynomials are
integrated exactly.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, NumericalError

DEFAULT_ORDER = 32


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Nodes and weights on [0, 1]."""
    if order < 1:
        raise DomainError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_edges(a: float, b: float, breaks: Iterable[float] = ()) -> np.ndarray:
    """Sorted panel edges of [a, b] including every break strictly inside."""
    inner = [t for t in breaks if a < t < b]
    return np.unique(np.array([a, b, *inner], dtype=float))


def panel_nodes(a: float, b: float, breaks: Iterable[float] = (), order: int = DEFAULT_ORDER):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    if b <= a:
        return np.empty(0), np.empty(0)
    x0, w0 = gauss_legendre(order)
    edges = panel_edges(a, b, breaks)
    widths = np.diff(edges)
    nodes = (edges[:-1, None] + widths[:, None] * x0[None, :]).ravel()
    weights = (widths[:, None] * w0[None, :]).ravel()
    return nodes, weights


def box_integral(g: Callable[[np.ndarray], np.ndarray], lows: Sequence[float], highs: Sequence[float],
                 breaks: Iterable[float] = (), order: int = DEFAULT_ORDER) -> float:
    """Tensor Gauss-Legendre integral of ``g`` over a box.

    ``g`` receives an array of shape ``(m, d)``.  ``breaks`` are split points
    applied along every axis.  A zero-dimensional box integrates to
    ``g`` evaluated at the empty point.
    """
    d = len(lows)
    breaks = tuple(breaks)
    if d == 0:
        return float(np.asarray(g(np.zeros((1, 0))))[0])
    axes = [panel_nodes(lo, hi, breaks, order) for lo, hi in zip(lows, highs)]
    if any(len(n) == 0 for n, _ in axes):
        return 0.0
    grids = np.meshgrid(*[n for n, _ in axes], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for k, (_, w) in enumerate(axes):
        shape = [1] * d
        shape[k] = len(w)
        wgrid = wgrid * w.reshape(shape)
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    vals = np.asarray(g(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand value in box quadrature")
    return float(np.dot(vals, wgrid.ravel()))


def anchored_cube_integral(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, d: int,
                           anchor: str = "max", breaks: Iterable[float] = (),
                           order: int = DEFAULT_ORDER) -> float:
    """Integral of ``g`` over ``[lo, hi]**d`` split by which coordinate is extreme.

    With ``anchor="max"`` the cube is the union over ``i`` of
    ``{x_i = M >= every other coordinate}``; the outer variable ``M`` runs
    over panels split at ``breaks`` and the others over ``[lo, M]``.
    Integrands that depend on the cube through ``max(x)`` therefore only see
    kinks at panel edges.  ``anchor="min"`` is the mirror image.
    """
    if anchor not in ("max", "min"):
        raise DomainError(f"anchor must be 'max' or 'min', got {anchor!r}")
    breaks = tuple(breaks)
    if d == 1:
        return box_integral(g, [lo], [hi], breaks, order)
    outer, w_outer = panel_nodes(lo, hi, breaks, order)
    total = 0.0
    for M, wM in zip(outer, w_outer):
        if anchor == "max":
            lows, highs = [lo] * (d - 1), [M] * (d - 1)
        else:
            lows, highs = [M] * (d - 1), [hi] * (d - 1)
        for i in range(d):
            def slice_g(rest, i=i, M=M):
                pts = np.insert(rest, i, M, axis=1)
                return g(pts)
            total += wM * box_integral(slice_g, lows, highs, breaks, order)
    return total


def simplex_integral(g: Callable[[np.ndarray], np.ndarray], d: int, a: float,
                     order: int = DEFAULT_ORDER) -> float:
    """Integral of ``g`` over ``{w >= 0, sum(w) <= a}`` in ``d`` dimensions.

    Collapsed (Duffy) coordinates ``w_k = (a - w_1 - ... - w_{k-1}) s_k``
    map the unit cube onto the simplex; polynomials of degree below
    ``2 * order - d`` are integrated exactly.
    """
    if a <= 0:
        return 0.0
    if d == 0:
        return float(np.asarray(g(np.zeros((1, 0))))[0])
    x0, w0 = gauss_legendre(order)
    grids = np.meshgrid(*([x0] * d), indexing="ij")
    S = np.stack([gr.ravel() for gr in grids], axis=1)
    W = np.ones(S.shape[0])
    for k in range(d):
        shape = [1] * d
        shape[k] = order
        W = W * np.broadcast_to(w0.reshape(shape), grids[0].shape).ravel()
    pts = np.empty_like(S)
    remaining = np.full(S.shape[0], float(a))
    jac = np.ones(S.shape[0])
    for k in range(d):
        pts[:, k] = remaining * S[:, k]
        jac *= remaining
        remaining = remaining - pts[:, k]
    vals = np.asarray(g(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand value in simplex quadrature")
    return float(np.dot(vals, W * jac))
