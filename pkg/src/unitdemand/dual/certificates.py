"""Numerical certificates for (non-)optimality of uniform pricing on ``U[c, c+1]**n``.

Three independent routes reach a verdict:

* the closed-form margin ``(n+1)(c+1-p) - (c+1)``;
* random upper sets ``U`` of ``D_n``, on which the pushed density must carry
  at least as much mass as the top-face density ``c+1`` when uniform
  pricing is optimal;
* the convex witness ``v(x) = max(sum(x) - (nc+n+c-p), 0)``, which separates
  the two measures exactly when the margin is negative.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError
from ..pricing import threshold_c_star, uniform_bundle_price
from ..quadrature import DEFAULT_ORDER, gauss_legendre, panel_nodes, simplex_integral
from .measure import RegionGeometry, TransformedMeasure, UpperSetStaircase, pushed_density

__all__ = [
    "CertificateReport",
    "WitnessFunction",
    "WitnessGap",
    "DOrderedResult",
    "density_difference",
    "convex_dominance_closed_form",
    "upper_set_integral",
    "upper_set_dominance_test",
    "d_ordered_check",
    "cylinder_reduction_check",
    "necessity_witness_gap",
    "certify",
]

MARGIN_TOL = 1e-12
UPPER_SET_TOL = 1e-9


@dataclass
class CertificateReport:
    n: int
    c: float
    p: float
    checks: list = field(default_factory=list)
    verdict: str = "inconclusive"
    trace: Optional[list] = None

    def add(self, check: str, value, passed: bool):
        self.checks.append({"check": check, "value": value, "pass": bool(passed)})

    def to_dict(self) -> dict:
        return {"n": self.n, "c": self.c, "p": self.p, "checks": list(self.checks), "verdict": self.verdict}


def _verdict(optimal: bool) -> str:
    return "optimal" if optimal else "not_optimal"


def density_difference(geom: RegionGeometry) -> Callable[[np.ndarray], np.ndarray]:
    """Pushed density minus the top-face density ``c+1``, on ``D_n`` free coordinates."""

    def phi(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return pushed_density(z.min(axis=1), geom) - (geom.c + 1)

    return phi


def convex_dominance_closed_form(n: int, c: float) -> CertificateReport:
    """Verdict from the sign of ``(n+1)(c+1-p) - (c+1)``; zero counts as optimal."""
    geom = RegionGeometry(n, c)
    margin = (n + 1) * (c + 1 - geom.p) - (c + 1)
    report = CertificateReport(n, float(c), geom.p)
    report.add("margin", margin, True)
    th = threshold_c_star(n)
    report.add("margin_zero_matches_threshold", abs(th.cross_check - th.c_star), abs(th.cross_check - th.c_star) <= 1e-8)
    report.add("margin_at_threshold", th.margin_at_root, abs(th.margin_at_root) <= 1e-8)
    report.verdict = _verdict(margin >= -MARGIN_TOL)
    return report


def upper_set_integral(phi: Callable[[np.ndarray], np.ndarray], U: UpperSetStaircase, geom: RegionGeometry,
                       order: int = DEFAULT_ORDER) -> float:
    """Integral of ``phi`` over ``U`` intersected with ``D_n`` (free coordinates ``x_2..x_n``).

    Supported for ``n`` in {2, 3}.  Panels are split at the staircase cell
    edges, at the points where a threshold meets the diagonal and at
    ``2c+1-p``, so an integrand that is piecewise linear in the minimum is
    integrated exactly.
    """
    n, c = geom.n, geom.c
    hi = c + 1.0
    s = geom.split
    if U.dim != n - 1:
        raise DomainError(f"upper set must live on {n - 1} free coordinates")
    x0, w0 = gauss_legendre(order)

    def inner(a, b):
        # per-row integral of phi(x_n) over [a, b], split at s
        total = np.zeros_like(a)
        for lo, up in ((a, np.minimum(b, s)), (np.maximum(a, s), b)):
            width = np.maximum(up - lo, 0.0)
            t = lo[:, None] + width[:, None] * x0[None, :]
            if n == 2:
                vals = phi(t.reshape(-1, 1)).reshape(t.shape)
            else:
                lead = np.repeat(outer_nodes[:, None], order, axis=1)
                vals = phi(np.stack([lead.ravel(), t.ravel()], axis=1)).reshape(t.shape)
            total = total + width * (vals @ w0)
        return total

    if n == 2:
        a = np.array([max(float(U.tau), c)])
        return float(inner(a, np.array([hi]))[0])
    if n != 3:
        raise DomainError("upper-set integrals are implemented for n = 2 and n = 3")
    edges = U.cell_edges()
    breaks = list(edges) + [s] + [t for t in np.ravel(U.tau) if np.isfinite(t)]
    outer_nodes, outer_w = panel_nodes(c, hi, breaks, order)
    tau = U.threshold_at(outer_nodes[:, None])
    a = np.clip(tau, c, np.inf)
    vals = inner(np.minimum(a, outer_nodes), outer_nodes)
    return float(np.dot(vals, outer_w))


def upper_set_dominance_test(n: int, c: float, samples: int = 500, seed: int = 0, resolution: int = 32,
                             tol: float = UPPER_SET_TOL, order: int = DEFAULT_ORDER,
                             trace: bool = False) -> CertificateReport:
    """Search upper sets of ``D_n`` for one where the top-face mass exceeds the pushed mass.

    The whole of ``D_n`` and the corner ``{min >= 2c+1-p}`` are always
    tried first; the remaining sets are random staircases.  The verdict is
    ``optimal`` when every integral is at least ``-tol``.
    """
    if samples < 100:
        raise DomainError("need at least 100 upper sets")
    geom = RegionGeometry(n, c)
    phi = density_difference(geom)
    lo, hi, dim = geom.c, geom.c + 1, n - 1
    rng = np.random.default_rng(seed)
    sets = [("whole", UpperSetStaircase.everything(lo, hi, dim)),
            ("corner", UpperSetStaircase.constant(lo, hi, dim, geom.split, resolution if dim > 1 else 1))]
    while len(sets) < samples:
        sets.append((f"random_{len(sets)}", UpperSetStaircase.random(rng, lo, hi, dim, resolution)))
    values = []
    rows = []
    for name, U in sets:
        val = upper_set_integral(phi, U, geom, order)
        values.append(val)
        if trace:
            rows.append({"index": len(rows), "name": name, "integral": val,
                         "thresholds": [float(t) for t in np.ravel(U.tau)]})
    values = np.asarray(values)
    k = int(np.argmin(values))
    report = CertificateReport(n, float(c), geom.p, trace=rows if trace else None)
    whole = float(values[0])
    report.add("whole_set_balance", whole, abs(whole) <= 1e-9)
    report.add("min_upper_set_integral", float(values[k]), bool(values[k] >= -tol))
    report.add("min_upper_set", sets[k][0], True)
    report.add("violations", int(np.count_nonzero(values < -tol)), True)
    report.verdict = _verdict(bool(values[k] >= -tol))
    return report


@dataclass(frozen=True)
class DOrderedResult:
    is_d_ordered: bool
    r: Optional[float]
    depends_on_min_only: bool
    worst_min_dependence: float


def _ordered_lattice(c: float, dim: int, grid: int) -> np.ndarray:
    vals = c + (np.arange(grid) + 0.5) / grid
    pts = [sorted(combo, reverse=True) for combo in itertools.combinations_with_replacement(vals, dim)]
    return np.asarray(pts, dtype=float)


def d_ordered_check(density_diff: Callable[[np.ndarray], np.ndarray], n: int, c: float, grid: int = 64,
                    atol: float = 1e-12) -> DOrderedResult:
    """Find ``r`` with ``f(x) (min(x) - r) >= 0`` on a lattice of ``D_n``.

    Points are ordered tuples of free coordinates ``x_2 >= ... >= x_n``.  The
    returned ``r`` is interpolated linearly between the last negative and
    the first positive lattice value; with no negative values it is the
    support minimum ``c``, with no positive values the maximum ``c+1``.
    """
    dim = n - 1
    pts = _ordered_lattice(c, dim, grid)
    vals = np.asarray(density_diff(pts), dtype=float)
    mins = pts.min(axis=1)
    # compare with the point that has the same minimum and all else at the top
    probe = np.full_like(pts, c + 1.0)
    probe[:, -1] = mins
    ref = np.asarray(density_diff(probe), dtype=float)
    worst_dep = float(np.max(np.abs(vals - ref))) if len(vals) else 0.0
    dep_ok = worst_dep <= 1e-9 * max(1.0, float(np.max(np.abs(vals))))
    neg = vals < -atol
    pos = vals > atol
    if not neg.any():
        return DOrderedResult(True, float(c), dep_ok, worst_dep)
    if not pos.any():
        return DOrderedResult(True, float(c + 1), dep_ok, worst_dep)
    last_neg = float(mins[neg].max())
    first_pos = float(mins[pos].min())
    if last_neg >= first_pos:
        return DOrderedResult(False, None, dep_ok, worst_dep)
    v_neg = float(vals[neg][np.argmax(mins[neg])])
    v_pos = float(vals[pos][np.argmin(mins[pos])])
    r = last_neg + (first_pos - last_neg) * (-v_neg) / (v_pos - v_neg)
    return DOrderedResult(True, r, dep_ok, worst_dep)


def cylinder_reduction_check(density: Callable[[np.ndarray], np.ndarray], n: int, c: float, k: int,
                             grid: int = 32, order: int = DEFAULT_ORDER, breaks=()) -> dict:
    """Integrate out the smallest coordinate and test the result for D-ordering.

    ``density`` lives on the free coordinates of ``D_k`` (``k - 1`` of
    them); the reduced ``g(x_2..x_{k-1}) = int_c^{x_{k-1}} f dx_k`` lives on
    ``D_{k-1}``.
    """
    if k < 3:
        raise DomainError("cylinder reduction needs k >= 3")
    x0, w0 = gauss_legendre(order)

    def g(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        upper = z[:, -1]
        total = np.zeros(len(z))
        cuts = sorted(set([c] + [b for b in breaks]))
        for row, top in enumerate(upper):
            nodes, weights = panel_nodes(c, top, cuts, order)
            if len(nodes) == 0:
                continue
            pts = np.column_stack([np.repeat(z[row:row + 1], len(nodes), axis=0), nodes])
            total[row] = np.dot(np.asarray(density(pts), dtype=float), weights)
        return total

    before = d_ordered_check(density, k, c, grid)
    after = d_ordered_check(g, k - 1, c, grid)
    return {
        "k": k,
        "f_d_ordered": before.is_d_ordered,
        "f_r": before.r,
        "g_d_ordered": after.is_d_ordered,
        "g_r": after.r,
        "induction_step_holds": (not before.is_d_ordered) or after.is_d_ordered,
    }


@dataclass(frozen=True)
class WitnessFunction:
    n: int
    c: float
    p: float

    @property
    def offset(self) -> float:
        return self.n * self.c + self.n + self.c - self.p

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.maximum(x.sum(axis=1) - self.offset, 0.0)


@dataclass(frozen=True)
class WitnessGap:
    int_mu_plus: float
    int_gamma1: float
    gap: float
    closed_form: float

    def as_tuple(self):
        return self.int_mu_plus, self.int_gamma1, self.gap


def necessity_witness_gap(n: int, c: float, p: Optional[float] = None, order: int = 16) -> WitnessGap:
    """``int v d(mu_+) - int v d(gamma_1)`` for the convex witness ``v``.

    On a top face the witness is supported on a simplex of side ``p - c``
    at the top corner, so each face integral runs over that simplex in
    collapsed coordinates.  ``closed_form`` is ``-n (p-c)**n M / n!`` with
    ``M`` the margin, for comparison.
    """
    geom = RegionGeometry(n, c, p)
    p = geom.p
    v = WitnessFunction(n, c, p)
    tm = TransformedMeasure(n, c)
    a = p - c
    hi = c + 1.0

    def on_face(i, weight):
        def g(w):
            x = np.insert(hi - w, i, hi, axis=1)
            return v(x) * weight(x)
        return simplex_integral(g, n - 1, a, order)

    one = lambda x: np.ones(len(x))
    mu_plus = tm.point_mass * float(v(tm.point[None, :])[0])
    mu_plus += tm.top_face_density * sum(on_face(i, one) for i in range(n))
    # every face carries the same pushed density by symmetry
    gamma = n * on_face(0, lambda x: pushed_density(x[:, 1:].min(axis=1), geom))
    margin = (n + 1) * (c + 1 - p) - (c + 1)
    closed = -n * a**n * margin / math.factorial(n)
    return WitnessGap(mu_plus, gamma, mu_plus - gamma, closed)


def certify(n: int, c: float, samples: int = 500, seed: int = 0, resolution: int = 32,
            trace: bool = False) -> CertificateReport:
    """Run all three routes and report whether they agree.

    The verdict is the closed-form one when the routes agree and
    ``inconclusive`` otherwise.
    """
    closed = convex_dominance_closed_form(n, c)
    report = CertificateReport(n, float(c), closed.p)
    report.checks.extend(closed.checks)
    tm = TransformedMeasure(n, c)
    report.add("total_mass", tm.total_mass(), abs(tm.total_mass()) <= 1e-12)
    routes = {"closed_form": closed.verdict}
    if n in (2, 3):
        upper = upper_set_dominance_test(n, c, samples, seed, resolution, trace=trace)
        report.checks.extend(upper.checks)
        report.trace = upper.trace
        routes["upper_sets"] = upper.verdict
    else:
        report.add("upper_sets", "skipped for n > 3", True)
    gap = necessity_witness_gap(n, c)
    tol = 1e-12 * max(1.0, abs(gap.int_mu_plus))
    report.add("witness_gap", gap.gap, True)
    report.add("witness_gap_closed_form", gap.closed_form, abs(gap.gap - gap.closed_form) <= 1e-10)
    routes["witness"] = _verdict(gap.gap <= tol)
    agree = len(set(routes.values())) == 1
    report.add("routes_agree", routes, agree)
    report.verdict = closed.verdict if agree else "inconclusive"
    return report
