"""Optimal grand-bundle prices and the uniform-pricing threshold.

For ``n`` i.i.d. items with values ``U[c, c+1]`` the revenue-maximizing price
``p`` for the grand bundle (equivalently, one posted price for every item)
solves

    h(c, p) = 1 - (p - c)**n - n p (p - c)**(n - 1) = 0,

and uniform pricing is the optimal mechanism exactly when
``(n + 1)(c + 1 - p) >= c + 1``.  The largest such shift is the threshold
``c*_n``, the unique root on ``(0, n)`` of

    T_n(c) = (n + 1)**n - (n - c)**n - n**2 (c + 1)(n - c)**(n - 1).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from .distributions import Cdf
from .errors import DomainError, InternalInvariantError, NumericalError

__all__ = [
    "BundlePriceResult",
    "ThresholdResult",
    "OptimalityVerdict",
    "h_eval",
    "bundle_price",
    "uniform_bundle_price",
    "p_prime",
    "T_n",
    "T_n_scaled",
    "threshold_c_star",
    "threshold_margin",
    "uniform_pricing_optimal",
    "threshold_table",
    "revenue_by_quadrature",
]

PRICE_XTOL = 1e-14
BISECTION_MAXITER = 200
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class BundlePriceResult:
    n: int
    c: Union[float, dict, list]
    price: float
    revenue: float
    residual: float
    iterations: int
    method: str = "bisection"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "c": self.c,
            "price": self.price,
            "revenue": self.revenue,
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
        }


@dataclass(frozen=True)
class ThresholdResult:
    n: int
    c_star: float
    residual: float
    bracket: tuple
    cross_check: Optional[float] = None
    margin_at_root: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "c_star": self.c_star,
            "residual": self.residual,
            "bracket": list(self.bracket),
            "cross_check": self.cross_check,
            "margin_at_root": self.margin_at_root,
        }


@dataclass(frozen=True)
class OptimalityVerdict:
    n: int
    c: float
    uniform_pricing_optimal: bool
    margin: float
    rule: str
    rules: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "c": self.c,
            "uniform_pricing_optimal": self.uniform_pricing_optimal,
            "margin": self.margin,
            "rule": self.rule,
            "rules": dict(self.rules),
        }


def _check_n(n):
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")
    return int(n)


def h_eval(c: float, p: float, n: int) -> float:
    """First-order condition of p(1 - (p - c)**n) on (c, c+1), up to sign."""
    d = p - c
    return 1.0 - d**n - n * p * d ** (n - 1)


def _h_slope(c, p, n):
    d = p - c
    return -n * d ** (n - 2) * (2 * d + (n - 1) * p)


def uniform_bundle_price(c: float, n: int, xtol: float = PRICE_XTOL) -> tuple:
    """Root of ``h(c, .)`` on ``(c, c+1)``: returns ``(p, iterations)``.

    Safeguarded bisection to ``xtol`` followed by one Newton step that is
    kept only if it stays inside the final bracket and lowers ``|h|``.
    """
    n = _check_n(n)
    if c < 0:
        raise DomainError(f"shift c must be nonnegative, got {c}")
    lo, hi = float(c), float(c) + 1.0
    h_lo, h_hi = h_eval(c, lo, n), h_eval(c, hi, n)
    if not (h_lo > 0 > h_hi):
        raise InternalInvariantError(f"h does not change sign on [c, c+1]: h(c)={h_lo}, h(c+1)={h_hi}")
    it = 0
    while hi - lo > xtol and it < BISECTION_MAXITER:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h_eval(c, mid, n) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    p = 0.5 * (lo + hi)
    slope = _h_slope(c, p, n)
    if slope != 0:
        cand = p - h_eval(c, p, n) / slope
        if lo <= cand <= hi and abs(h_eval(c, cand, n)) < abs(h_eval(c, p, n)):
            p = cand
    return p, it


def _product_cdf(dists, p):
    out = 1.0
    for d in dists:
        out *= float(d.F(p))
    return out


def _product_pdf(dists, p):
    Fs = [float(d.F(p)) for d in dists]
    fs = [float(d.f(p)) for d in dists]
    total = 0.0
    for j, fj in enumerate(fs):
        term = fj
        for i, Fi in enumerate(Fs):
            if i != j:
                term *= Fi
        total += term
    return total


def _general_bundle_price(dists: Sequence[Cdf], tol: float, profile_points: int = 4097):
    """Maximize q (1 - prod_j F_j(q)) over the common support.

    The revenue profile is sampled first; more than one interior local
    maximum (beyond a relative tolerance) is reported as a numerical error.
    The peak is then refined by Brent's method on the first-order condition
    when it changes sign inside the sampled bracket, otherwise by bounded
    scalar maximization.
    """
    lo = max(d.support_lo for d in dists)
    hi = max(d.support_hi for d in dists)
    qs = np.linspace(lo, hi, profile_points)
    G = np.ones_like(qs)
    for d in dists:
        G = G * d.F(qs)
    R = qs * (1.0 - G)
    k = int(np.argmax(R))
    scale = max(float(R[k]), 1e-300)
    dR = np.diff(R)
    sig = np.abs(dR) > 1e-12 * scale
    signs = np.sign(dR[sig])
    changes = int(np.count_nonzero(np.diff(signs) < 0))
    if changes > 1:
        raise NumericalError(
            "revenue profile is not unimodal",
            local_maxima=changes,
            argmax=float(qs[k]),
            revenue=float(R[k]),
        )
    a = float(qs[max(k - 1, 0)])
    b = float(qs[min(k + 1, len(qs) - 1)])

    def foc(q):
        return 1.0 - _product_cdf(dists, q) - q * _product_pdf(dists, q)

    method = "brent_foc"
    if a < b and foc(a) > 0 > foc(b):
        res = optimize.brentq(foc, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=BISECTION_MAXITER,
                              full_output=True)
        p, info = res
        iterations = info.iterations
    else:
        method = "bounded_scalar"
        out = optimize.minimize_scalar(lambda q: -q * (1.0 - _product_cdf(dists, q)), bounds=(a, b),
                                       method="bounded", options={"xatol": tol})
        p, iterations = float(out.x), int(out.nfev)
    revenue = p * (1.0 - _product_cdf(dists, p))
    return float(p), float(revenue), abs(foc(p)), iterations, method


def bundle_price(dist: Union[Cdf, Sequence[Cdf]], n: Optional[int] = None, tol: float = 1e-12,
                 path: str = "auto") -> BundlePriceResult:
    """Revenue-maximizing grand-bundle price.

    Parameters
    ----------
    dist : Cdf or sequence of Cdf
        A single item distribution (then ``n`` i.i.d. copies) or one
        distribution per item.
    n : int, optional
        Number of items; required when ``dist`` is a single :class:`Cdf`.
    tol : float
        Residual tolerance.
    path : {"auto", "uniform", "general"}
        ``auto`` uses the closed-form root of ``h`` for shifted uniforms and
        the generic maximizer otherwise.

    Returns
    -------
    BundlePriceResult
    """
    if isinstance(dist, Cdf):
        if n is None:
            raise DomainError("n is required for a single distribution")
        n = _check_n(n)
        dists = [dist] * n
    else:
        dists = list(dist)
        if n is not None and n != len(dists):
            raise DomainError("n does not match the number of distributions")
        n = _check_n(len(dists))
    first = dists[0]
    identical_uniform = all(d is first for d in dists) and first.kind in ("uniform_shift", "uniform") and \
        math.isclose(first.support_hi - first.support_lo, 1.0)
    if path == "uniform" and not identical_uniform:
        raise DomainError("uniform path needs i.i.d. U[c, c+1] items")
    if path not in ("auto", "uniform", "general"):
        raise DomainError(f"unknown path {path!r}")

    if identical_uniform and path != "general":
        c = float(first.support_lo)
        p, it = uniform_bundle_price(c, n)
        residual = abs(h_eval(c, p, n))
        if residual > max(tol, 1e-12):
            raise NumericalError("price residual above tolerance", residual=residual, c=c, n=n)
        if not (c < p < c + 1):
            raise InternalInvariantError(f"price {p} outside ({c}, {c + 1})")
        revenue = p * (1.0 - (p - c) ** n)
        return BundlePriceResult(n, c, p, revenue, residual, it, "bisection")

    p, revenue, residual, it, method = _general_bundle_price(dists, tol=min(tol, 1e-12))
    label = first.to_spec() if all(d is first for d in dists) else [d.to_spec() for d in dists]
    return BundlePriceResult(n, label, p, revenue, residual, it, method)


def revenue_by_quadrature(dist: Cdf, n: int, price: float) -> float:
    """Posted-price revenue ``price * Pr[max >= price]`` from the density of the max."""
    n = _check_n(n)

    def max_density(m):
        return n * float(dist.F(m)) ** (n - 1) * float(dist.f(m))

    upper, _ = integrate.quad(max_density, price, dist.support_hi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return price * upper


def p_prime(c: float, p: float, n: int) -> float:
    """Derivative of the optimal price in the shift, by implicit differentiation of h."""
    n = _check_n(n)
    if not (c < p < c + 1):
        raise DomainError(f"p must lie in (c, c+1), got p={p}, c={c}")
    d = p - c
    denom = 2 * d + (n - 1) * p
    if not denom > 0:
        raise DomainError("non-positive denominator in p'")
    return 1.0 - d / denom


def T_n(c: float, n: int) -> float:
    """Threshold polynomial, evaluated directly (overflows for large n)."""
    return (n + 1) ** n - (n - c) ** n - n**2 * (c + 1) * (n - c) ** (n - 1)


def T_n_scaled(c: float, n: int) -> float:
    """``T_n(c) / (n + 1)**n`` computed in log space; valid for 0 <= c <= n.

    Both subtracted terms are positive, so the ratio is
    ``1 - exp(la) - exp(lb)`` with logarithms formed from ``log1p``.
    """
    n = _check_n(n)
    if not (0 <= c <= n):
        raise DomainError(f"c must lie in [0, n], got {c}")
    if c == n:
        return 1.0
    log_ratio = math.log1p(-(c + 1) / (n + 1))  # log((n - c) / (n + 1))
    la = n * log_ratio
    lb = 2 * math.log(n) + math.log(c + 1) - math.log(n - c) + n * log_ratio
    return 1.0 - math.exp(la) - math.exp(lb)


def threshold_margin(c: float, n: int) -> float:
    """``(n + 1)(c + 1 - p(c)) - (c + 1)``; nonnegative iff uniform pricing is optimal."""
    p, _ = uniform_bundle_price(c, n)
    return (n + 1) * (c + 1 - p) - (c + 1)


def _bisect_scalar(fun, lo, hi, xtol, decreasing=False):
    f_lo, f_hi = fun(lo), fun(hi)
    if decreasing:
        f_lo, f_hi = -f_lo, -f_hi
    if not (f_lo < 0 < f_hi):
        raise InternalInvariantError(f"no sign change on [{lo}, {hi}]: {f_lo}, {f_hi}")
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid <= lo or mid >= hi:
            break
        val = fun(mid)
        if decreasing:
            val = -val
        if val < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def _c_star_cached(n: int, tol: float, cross_check: bool) -> ThresholdResult:
    root = _bisect_scalar(lambda c: T_n_scaled(c, n), 0.0, float(n), xtol=tol)
    residual = abs(T_n_scaled(root, n)) / abs(T_n_scaled(0.0, n))
    if residual > 1e-9:
        raise NumericalError("threshold residual above tolerance", n=n, residual=residual)
    margin = threshold_margin(root, n)
    alt = None
    if cross_check:
        # the margin falls through zero at the same shift
        alt = _bisect_scalar(lambda c: threshold_margin(c, n), 0.0, float(n), xtol=tol, decreasing=True)
        if abs(alt - root) > max(10 * tol, 1e-10):
            raise InternalInvariantError(f"threshold definitions disagree for n={n}: {root} vs {alt}")
    return ThresholdResult(n, root, residual, (0.0, float(n)), alt, margin)


def threshold_c_star(n: int, tol: float = 1e-13, cross_check: bool = True) -> ThresholdResult:
    """Largest shift ``c`` for which uniform pricing is optimal with ``n`` items."""
    n = _check_n(n)
    return _c_star_cached(n, float(tol), bool(cross_check))


def uniform_pricing_optimal(c: float, n: int) -> OptimalityVerdict:
    """Decide optimality of uniform pricing by two independent rules.

    ``polynomial_sign`` tests ``c <= n and T_n(c) <= 0``; ``threshold_compare``
    tests ``c <= c*_n``.  Shifts within ``1e-10`` of the threshold count as
    the boundary, which is optimal.
    """
    n = _check_n(n)
    if c < 0:
        raise DomainError(f"shift c must be nonnegative, got {c}")
    c_star = threshold_c_star(n).c_star
    margin = threshold_margin(c, n)
    boundary = abs(c - c_star) <= BOUNDARY_TOL
    by_threshold = boundary or c <= c_star
    by_polynomial = boundary or (c <= n and T_n_scaled(c, n) <= 0)
    if by_threshold != by_polynomial:
        raise InternalInvariantError(f"optimality rules disagree at c={c}, n={n}")
    return OptimalityVerdict(
        n, float(c), by_polynomial, margin, "polynomial_sign",
        {"polynomial_sign": by_polynomial, "threshold_compare": by_threshold, "c_star": c_star,
         "boundary": boundary},
    )


def threshold_table(n_max: int, workers: Optional[int] = None, cross_check: bool = True) -> list:
    """``c*_n`` for ``n = 2..n_max``, checked to rise strictly and exceed ``ln(n)/3``."""
    n_max = _check_n(n_max)
    ns = range(2, n_max + 1)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda k: threshold_c_star(k, cross_check=cross_check), ns))
    else:
        rows = [threshold_c_star(k, cross_check=cross_check) for k in ns]
    for prev, cur in zip(rows, rows[1:]):
        if not cur.c_star > prev.c_star:
            raise InternalInvariantError(f"c* not increasing between n={prev.n} and n={cur.n}")
    for row in rows:
        if not row.c_star > math.log(row.n) / 3:
            raise InternalInvariantError(f"c*_{row.n} = {row.c_star} is below ln(n)/3")
    return rows
