"""Exact revenue-maximizing mechanism on a finite type grid, as a linear program.

Variables per type ``t`` are the utility ``u(t) >= 0`` and the allocation
``a(t)`` in ``[0, 1]**n`` with ``sum(a(t)) <= 1``; the payment is
``a(t).t - u(t) >= 0``.  Incentive compatibility for the ordered pair
``(t, t')`` reads ``u(t) >= u(t') + a(t').(t - t')``.

All ``m (m - 1)`` IC pairs are enforced.  By default they are added lazily:
the LP starts from grid neighbours and every round adds the pairs the
current optimum violates, until none is violated.  The final point is
feasible for the full pairwise LP and optimal for a relaxation of it, so it
is optimal for the full LP.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import DomainError, InternalInvariantError, NumericalError
from .grid import GridProblem
from .menu import MenuMechanism

__all__ = ["LpSolution", "solve_lp_exact", "DEFAULT_CAPS", "ic_violations"]

DEFAULT_CAPS = {1: 4096, 2: 40**2, 3: 12**3}
FEASIBILITY_TOL = 1e-8


@dataclass
class LpSolution:
    types: np.ndarray
    weights: np.ndarray
    allocation: np.ndarray
    payment: np.ndarray
    utility: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    ic_pairs: int = 0
    max_ic_violation: float = 0.0
    max_ir_violation: float = 0.0
    grid: Optional[GridProblem] = field(default=None, repr=False)
    seconds: float = 0.0

    @property
    def n(self) -> int:
        return self.types.shape[1]

    def to_menu(self, decimals: int = 9) -> MenuMechanism:
        """The menu of distinct (allocation, payment) pairs chosen by some type.

        Offering it reproduces the LP outcome; zero-weight types that were
        left out of the LP respond to it as any buyer would.
        """
        rows = np.column_stack([self.allocation, self.payment])
        keys = np.round(rows, decimals)
        _, first = np.unique(keys, axis=0, return_index=True)
        first = np.sort(first)
        keep = [i for i in first if self.allocation[i].sum() > 0 or self.payment[i] > 0]
        qs = np.clip(self.allocation[keep], 0.0, 1.0)
        sums = qs.sum(axis=1, keepdims=True)
        qs = np.where(sums > 1, qs / np.maximum(sums, 1e-300), qs)
        prices = np.clip(self.payment[keep], 0.0, None)
        if not keep:
            return MenuMechanism.from_item_lotteries(np.zeros((0, self.n)), np.zeros(0))
        return MenuMechanism.from_item_lotteries(qs, prices)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "status": self.status,
            "iterations": self.iterations,
            "ic_pairs": self.ic_pairs,
            "max_ic_violation": self.max_ic_violation,
            "max_ir_violation": self.max_ir_violation,
            "types": self.types.tolist(),
            "weights": self.weights.tolist(),
            "allocation": self.allocation.tolist(),
            "payment": self.payment.tolist(),
            "utility": self.utility.tolist(),
        }


def ic_violations(types: np.ndarray, allocation: np.ndarray, utility: np.ndarray,
                  block: int = 512) -> np.ndarray:
    """Matrix of ``u(t') + a(t').(t - t') - u(t)`` over all pairs; positive = violated.

    Row ``i`` is the true type, column ``j`` the report.
    """
    m = len(types)
    out = np.empty((m, m))
    proj = np.einsum("jd,jd->j", allocation, types)
    for start in range(0, m, block):
        sl = slice(start, start + block)
        out[sl] = utility[None, :] + types[sl] @ allocation.T - proj[None, :] - utility[sl, None]
    np.fill_diagonal(out, 0.0)
    return out


def _neighbour_pairs(grid: GridProblem, keep: np.ndarray) -> np.ndarray:
    """Ordered pairs of kept types that are adjacent on the product grid."""
    if grid.axes is None:
        return np.empty((0, 2), dtype=int)
    shape = grid.shape
    index = np.full(len(grid.types), -1)
    index[keep] = np.arange(int(keep.sum()))
    coords = np.array(np.unravel_index(np.arange(len(grid.types)), shape)).T
    pairs = []
    for offset in np.ndindex(*([3] * grid.n)):
        off = np.asarray(offset) - 1
        if not off.any():
            continue
        nb = coords + off
        ok = np.all((nb >= 0) & (nb < np.asarray(shape)), axis=1)
        src = np.flatnonzero(ok)
        dst = np.ravel_multi_index(nb[ok].T, shape)
        a, b = index[src], index[dst]
        good = (a >= 0) & (b >= 0)
        pairs.append(np.column_stack([a[good], b[good]]))
    return np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=int)


def solve_lp_exact(grid: GridProblem, tol: float = 1e-9, method: str = "cutting_plane",
                   max_types: Optional[int] = None, max_rounds: int = 100) -> LpSolution:
    """Revenue-maximizing IC/IR mechanism on the grid.

    Parameters
    ----------
    grid : GridProblem
        Types and probabilities.  Zero-probability types are dropped before
        solving; they neither add revenue nor restrict the mechanism's
        behaviour on the support.
    tol : float
        IC violation above which a pair is added in the cutting-plane loop.
    method : {"cutting_plane", "full"}
        ``full`` writes every pairwise constraint up front.
    max_types : int, optional
        Cap on the number of positive-probability types; defaults to 1600
        for two items and 1728 for three.
    max_rounds : int
        Cutting-plane rounds before giving up with status ``unconverged``.
    """
    started = time.perf_counter()
    keep = grid.weights > 0
    T = grid.types[keep]
    w = grid.weights[keep]
    m, n = T.shape
    cap = max_types if max_types is not None else DEFAULT_CAPS.get(n, 10**3)
    if m > cap:
        raise DomainError(f"{m} types exceed the LP cap of {cap}; raise max_types to override")
    if method not in ("cutting_plane", "full"):
        raise DomainError(f"unknown LP method {method!r}")

    nv = m + m * n
    cost = np.concatenate([w, -(w[:, None] * T).ravel()])
    rows_t = np.repeat(np.arange(m), n)
    cols_a = m + np.arange(m * n)
    pay = sp.hstack([sp.eye(m, format="csr"), -sp.csr_matrix((T.ravel(), (rows_t, cols_a - m)), shape=(m, m * n))])
    simplex = sp.hstack([sp.csr_matrix((m, m)), sp.csr_matrix((np.ones(m * n), (rows_t, cols_a - m)), shape=(m, m * n))])
    bounds = [(0, None)] * m + [(0, 1)] * (m * n)

    def ic_rows(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        k = len(i)
        r = np.arange(k)
        R = [r, r] + [r] * n
        C = [j, i] + [m + j * n + d for d in range(n)]
        V = [np.ones(k), -np.ones(k)] + [T[i, d] - T[j, d] for d in range(n)]
        return sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))), shape=(k, nv))

    if method == "full":
        I, J = np.nonzero(~np.eye(m, dtype=bool))
        pairs = np.column_stack([I, J])
    else:
        pairs = _neighbour_pairs(grid, keep)
    seen = set(map(tuple, pairs.tolist()))
    status = "optimal"
    rounds = 0
    while True:
        rounds += 1
        blocks = [pay, simplex] if len(pairs) == 0 else [ic_rows(pairs), pay, simplex]
        A = sp.vstack(blocks).tocsr()
        b = np.concatenate([np.zeros(len(pairs)), np.zeros(m), np.ones(m)])
        res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status == 2:
            raise InternalInvariantError("LP reported infeasible; the null mechanism is always feasible")
        if res.status != 0 or res.x is None:
            raise NumericalError("LP solver failed", status=int(res.status), message=res.message)
        u = res.x[:m]
        a = res.x[m:].reshape(m, n)
        if method == "full":
            break
        viol = ic_violations(T, a, u)
        I, J = np.nonzero(viol > tol)
        fresh = [(i, j) for i, j in zip(I.tolist(), J.tolist()) if (i, j) not in seen]
        if not fresh:
            break
        if rounds >= max_rounds:
            status = "unconverged"
            break
        seen.update(fresh)
        pairs = np.concatenate([pairs, np.asarray(fresh, dtype=int)]) if len(pairs) else np.asarray(fresh, dtype=int)

    a = np.clip(a, 0.0, 1.0)
    u = np.maximum(u, 0.0)
    payment = np.einsum("td,td->t", a, T) - u
    viol = ic_violations(T, a, u)
    max_ic = float(max(viol.max(), 0.0)) if m > 1 else 0.0
    max_ir = float(max(-u.min(), -payment.min(), 0.0))
    if status == "optimal" and (max_ic > FEASIBILITY_TOL or max_ir > FEASIBILITY_TOL):
        raise InternalInvariantError(f"LP optimum violates IC/IR: ic={max_ic:.3e}, ir={max_ir:.3e}")
    return LpSolution(T, w, a, payment, u, float(np.dot(w, payment)), status, rounds, len(pairs),
                      max_ic, max_ir, grid, time.perf_counter() - started)
