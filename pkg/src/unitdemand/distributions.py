"""Item-value distributions and grid checks of the monotonicity conditions.

A :class:`Cdf` bundles a distribution on a compact interval with vectorized
access to its CDF, log-CDF, density and quantile function.  Built-ins cover
the shifted uniform ``U[c, c+1]``, the power law ``x**alpha`` on ``[0, 1]``,
truncated exponentials, Beta laws and monotone piecewise-linear tables.

The checkers in the second half of the module are falsification tools: they
sample a condition on a finite grid and report the worst violation seen.  A
pass is evidence, not proof.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

from .errors import DomainError, InvalidDistributionError, NumericalError

__all__ = [
    "Cdf",
    "PowerScaledProduct",
    "MonotonicityReport",
    "uniform",
    "uniform_shift",
    "power",
    "truncated_exponential",
    "beta",
    "table",
    "from_spec",
    "scale_monotone_check",
    "quantile_scaled_check",
    "monotone_elasticity_check",
    "relative_value_conditional_cdf",
    "relative_value_conditional_cdf_mc",
    "stochastic_relative_values_check",
    "DEFAULT_GRID",
    "DEFAULT_TOL",
]

DEFAULT_GRID = 256
DEFAULT_TOL = 1e-9
BISECTION_XTOL = 1e-12
BISECTION_MAXITER = 200

Vectorized = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Cdf:
    """A continuous distribution on ``[support_lo, support_hi]``.

    ``cdf``, ``pdf`` and ``quantile`` must accept numpy arrays.  Callers go
    through :meth:`F`, :meth:`logF`, :meth:`f` and :meth:`ppf`, which clamp
    arguments outside the support (``F = 0`` below, ``F = 1`` above).
    """

    support_lo: float
    support_hi: float
    cdf: Vectorized
    pdf: Vectorized
    quantile: Vectorized
    logcdf: Optional[Vectorized] = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = float(self.support_lo), float(self.support_hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidDistributionError("support must be finite")
        if lo < 0 or hi <= lo:
            raise InvalidDistributionError(f"need 0 <= support_lo < support_hi, got [{lo}, {hi}]")

    def F(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.support_lo, self.support_hi)
        out = np.where(x <= self.support_lo, 0.0, np.where(x >= self.support_hi, 1.0, self.cdf(inside)))
        return out

    def logF(self, x) -> np.ndarray:
        """log F(x), ``-inf`` at or below the lower support end."""
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.support_lo, self.support_hi)
        with np.errstate(divide="ignore"):
            if self.logcdf is not None:
                val = self.logcdf(inside)
            else:
                val = np.log(self.cdf(inside))
        return np.where(x <= self.support_lo, -np.inf, np.where(x >= self.support_hi, 0.0, val))

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.support_lo, self.support_hi)
        return np.where((x < self.support_lo) | (x > self.support_hi), 0.0, self.pdf(inside))

    def ppf(self, q) -> np.ndarray:
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        return np.clip(self.quantile(q), self.support_lo, self.support_hi)

    def powered(self, alpha: float) -> "Cdf":
        """The distribution with CDF ``F**alpha`` on the same support."""
        if not alpha > 0:
            raise DomainError(f"power must be positive, got {alpha}")
        if alpha == 1:
            return self
        base = self

        def pdf(x):
            Fx = base.F(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(Fx > 0, alpha * Fx ** (alpha - 1) * base.f(x), 0.0 if alpha > 1 else np.inf)

        return Cdf(
            self.support_lo,
            self.support_hi,
            cdf=lambda x: base.F(x) ** alpha,
            pdf=pdf,
            quantile=lambda q: base.ppf(np.asarray(q, dtype=float) ** (1.0 / alpha)),
            logcdf=lambda x: alpha * base.logF(x),
            kind="power_of",
            params={"base": base.to_spec(), "alpha": alpha},
        )

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.ppf(rng.random(size))

    def to_spec(self) -> dict:
        return {"kind": self.kind, **self.params}

    def validate(self, points: int = 257, tol: float = 1e-9) -> None:
        """Spot-check the invariants on an interior grid; raise if broken."""
        xs = np.linspace(self.support_lo, self.support_hi, points)
        Fs = self.F(xs)
        if not np.all(np.isfinite(Fs)):
            raise InvalidDistributionError("non-finite CDF values")
        if abs(Fs[0]) > tol or abs(Fs[-1] - 1) > tol:
            raise InvalidDistributionError("CDF must run from 0 to 1 over the support")
        if np.any(np.diff(Fs) < -tol):
            raise InvalidDistributionError("CDF is decreasing somewhere")
        interior = xs[1:-1]
        if np.any(~(self.f(interior) > 0)):
            raise InvalidDistributionError("density must be positive on the open support")
        back = self.ppf(self.F(interior))
        if np.max(np.abs(back - interior)) > 1e-6 * (self.support_hi - self.support_lo):
            raise InvalidDistributionError("quantile is not the inverse of the CDF")


# ---------------------------------------------------------------------------
# built-in families


def uniform(lo: float, hi: float) -> Cdf:
    width = hi - lo
    return Cdf(
        lo,
        hi,
        cdf=lambda x: (x - lo) / width,
        pdf=lambda x: np.full_like(np.asarray(x, dtype=float), 1.0 / width),
        quantile=lambda q: lo + width * np.asarray(q, dtype=float),
        logcdf=lambda x: np.log(np.maximum(x - lo, 0.0)) - math.log(width),
        kind="uniform",
        params={"lo": lo, "hi": hi},
    )


def uniform_shift(c: float) -> Cdf:
    """U[c, c+1]."""
    if c < 0:
        raise DomainError(f"shift must be nonnegative, got {c}")
    d = uniform(c, c + 1.0)
    return Cdf(d.support_lo, d.support_hi, d.cdf, d.pdf, d.quantile, d.logcdf, "uniform_shift", {"c": c})


def power(alpha: float, hi: float = 1.0) -> Cdf:
    """F(x) = (x/hi)**alpha on [0, hi]."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")

    def pdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return alpha / hi * (x / hi) ** (alpha - 1)

    return Cdf(
        0.0,
        hi,
        cdf=lambda x: (np.asarray(x, dtype=float) / hi) ** alpha,
        pdf=pdf,
        quantile=lambda q: hi * np.asarray(q, dtype=float) ** (1.0 / alpha),
        logcdf=lambda x: alpha * np.log(np.asarray(x, dtype=float) / hi),
        kind="power",
        params={"alpha": alpha, "hi": hi},
    )


def truncated_exponential(rate: float, lo: float = 0.0, hi: float = 1.0) -> Cdf:
    """Density proportional to exp(-rate * x) on [lo, hi]; any sign of rate."""
    if rate == 0:
        d = uniform(lo, hi)
        return Cdf(lo, hi, d.cdf, d.pdf, d.quantile, d.logcdf, "truncated_exponential",
                   {"rate": 0.0, "lo": lo, "hi": hi})
    width = hi - lo
    # mass = -expm1(-rate * width) / rate, written stably for both signs
    z = -math.expm1(-rate * width)

    def cdf(x):
        return -np.expm1(-rate * (np.asarray(x, dtype=float) - lo)) / z

    def pdf(x):
        return rate * np.exp(-rate * (np.asarray(x, dtype=float) - lo)) / z

    def quantile(q):
        return lo - np.log1p(-np.asarray(q, dtype=float) * z) / rate

    return Cdf(lo, hi, cdf, pdf, quantile, None, "truncated_exponential",
               {"rate": rate, "lo": lo, "hi": hi})


def _log_clamped(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def beta(a: float, b: float) -> Cdf:
    if not (a > 0 and b > 0):
        raise DomainError("beta parameters must be positive")
    law = stats.beta(a, b)
    return Cdf(
        0.0,
        1.0,
        cdf=lambda x: special.betainc(a, b, x),
        pdf=law.pdf,
        quantile=law.ppf,
        logcdf=lambda x: _log_clamped(special.betainc(a, b, x)),
        kind="beta",
        params={"a": a, "b": b},
    )


def table(xs: Sequence[float], Fs: Sequence[float]) -> Cdf:
    """Monotone piecewise-linear CDF through the knots ``(xs[i], Fs[i])``.

    Values are renormalized to run from 0 to 1; every segment must rise
    strictly so the density stays positive.
    """
    x = np.asarray(xs, dtype=float)
    F = np.asarray(Fs, dtype=float)
    if x.ndim != 1 or x.shape != F.shape or len(x) < 2:
        raise InvalidDistributionError("table needs matching 1-D knot arrays of length >= 2")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(F))):
        raise InvalidDistributionError("table contains non-finite values")
    if np.any(np.diff(x) <= 0):
        raise InvalidDistributionError("table x-knots must be strictly increasing")
    span = F[-1] - F[0]
    if not span > 0:
        raise InvalidDistributionError("table CDF values must increase")
    F = (F - F[0]) / span
    slopes = np.diff(F) / np.diff(x)
    if np.any(slopes <= 0):
        raise InvalidDistributionError("table CDF must be strictly increasing (positive density)")

    def pdf(t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(x, t, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    return Cdf(
        float(x[0]),
        float(x[-1]),
        cdf=lambda t: np.interp(t, x, F),
        pdf=pdf,
        quantile=lambda q: np.interp(q, F, x),
        kind="table",
        params={"x": x.tolist(), "F": F.tolist()},
    )


_BUILDERS = {
    "uniform_shift": lambda s: uniform_shift(float(s["c"])),
    "uniform": lambda s: uniform(float(s["lo"]), float(s["hi"])),
    "power": lambda s: power(float(s["alpha"]), float(s.get("hi", 1.0))),
    "truncated_exponential": lambda s: truncated_exponential(
        float(s["rate"]), float(s.get("lo", 0.0)), float(s.get("hi", 1.0))),
    "beta": lambda s: beta(float(s["a"]), float(s["b"])),
    "table": lambda s: table(s["x"], s["F"]),
}


def from_spec(spec: dict) -> Cdf:
    """Build a :class:`Cdf` from its JSON form, e.g. ``{"kind": "power", "alpha": 2}``."""
    try:
        kind = spec["kind"]
        builder = _BUILDERS[kind]
    except (KeyError, TypeError):
        raise InvalidDistributionError(f"unknown distribution spec {spec!r}") from None
    try:
        return builder(spec)
    except KeyError as exc:
        raise InvalidDistributionError(f"{kind} spec is missing field {exc}") from None


@dataclass(frozen=True)
class PowerScaledProduct:
    """Independent items, item j distributed as ``base**alphas[j]``."""

    base: Cdf
    alphas: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) < 1 or not all(a > 0 for a in alphas):
            raise DomainError("every alpha must be positive")
        object.__setattr__(self, "alphas", alphas)

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def A(self) -> float:
        return math.fsum(self.alphas)

    def A_b(self, b) -> float:
        return math.fsum(self.alphas[j] for j in b)

    def item(self, j: int) -> Cdf:
        return self.base.powered(self.alphas[j])

    def items(self) -> list:
        return [self.item(j) for j in range(self.n)]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, self.n))
        return self.base.ppf(u ** (1.0 / np.asarray(self.alphas)))

    def proper_subsets(self):
        """All item subsets other than the empty set and the grand bundle."""
        for r in range(1, self.n):
            yield from itertools.combinations(range(self.n), r)


# ---------------------------------------------------------------------------
# monotonicity checks


@dataclass
class MonotonicityReport:
    condition_name: str
    passed: bool
    worst_violation: float
    witness: list
    grid_resolution: int

    def to_dict(self) -> dict:
        return {
            "condition_name": self.condition_name,
            "passed": bool(self.passed),
            "worst_violation": float(self.worst_violation),
            "witness": [float(w) for w in self.witness],
            "grid_resolution": int(self.grid_resolution),
        }


def _report(name, increases, points_a, points_b, labels, tol, resolution):
    """Build a report from an array of per-step violations (positive = bad)."""
    worst = float(np.max(increases)) if increases.size else 0.0
    worst = max(worst, 0.0)
    passed = worst <= tol
    witness = []
    if not passed:
        idx = np.unravel_index(int(np.argmax(increases)), increases.shape)
        witness = [float(labels[idx[0]]), float(points_a[idx]), float(points_b[idx])]
    return MonotonicityReport(name, passed, worst, witness, resolution)


def _interior(lo, hi, m):
    return lo + (hi - lo) * np.arange(1, m + 1) / (m + 1)


def _check_grid(m):
    if m < 16:
        raise DomainError(f"grid resolution must be >= 16, got {m}")


def scale_monotone_check(F: Cdf, omega_grid: int = DEFAULT_GRID, x_grid: int = DEFAULT_GRID,
                         tol: float = DEFAULT_TOL) -> MonotonicityReport:
    """Check that x -> F(wx)/F(x) never increases, for each w on a grid.

    For every w in ``(lo/hi, 1)`` the ratio is sampled on ``(lo/w, hi]`` and
    the largest rise between consecutive samples is the violation.  Witness
    is ``[w, x_left, x_right]``.
    """
    _check_grid(omega_grid)
    _check_grid(x_grid)
    lo, hi = F.support_lo, F.support_hi
    omegas = _interior(lo / hi, 1.0, omega_grid)[:, None]
    start = lo / omegas
    steps = np.arange(1, x_grid + 1)[None, :] / x_grid
    xs = start + (hi - start) * steps
    logr = F.logF(omegas * xs) - F.logF(xs)
    if np.any(np.isnan(logr)) or np.any(logr == np.inf):
        raise InvalidDistributionError("non-finite CDF ratio on the check grid")
    ratio = np.exp(logr)
    rises = np.diff(ratio, axis=1)
    return _report("scale", rises, xs[:, :-1], xs[:, 1:], omegas[:, 0], tol, x_grid)


def _bisect(fun, lo, hi, target, xtol=BISECTION_XTOL, maxiter=BISECTION_MAXITER):
    """Vectorized bisection for increasing ``fun``: fun(lo) <= target <= fun(hi)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = fun(lo) - target
    fhi = fun(hi) - target
    bad = ~((flo <= 0) & (fhi >= 0))
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        raise NumericalError(
            "bisection bracket does not straddle the target",
            lo=float(lo.ravel()[i]), hi=float(hi.ravel()[i]),
            f_lo=float(flo.ravel()[i]), f_hi=float(fhi.ravel()[i]),
        )
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        below = fun(mid) - target < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) <= xtol:
            break
    return 0.5 * (lo + hi)


def quantile_scaled_check(F: Cdf, q_grid: int = DEFAULT_GRID, y_grid: int = DEFAULT_GRID,
                          tol: float = DEFAULT_TOL) -> MonotonicityReport:
    """Check that the w solving F(wy)/F(y) = q is non-decreasing in y.

    Witness is ``[q, y_left, y_right]`` at the largest drop of w.
    """
    _check_grid(q_grid)
    _check_grid(y_grid)
    lo, hi = F.support_lo, F.support_hi
    qs = _interior(0.0, 1.0, q_grid)[:, None]
    ys = (lo + (hi - lo) * np.arange(1, y_grid + 1) / y_grid)[None, :]
    qq, yy = np.broadcast_arrays(qs, ys)
    logq = np.log(qq)
    logFy = F.logF(yy)

    def log_ratio(w):
        return F.logF(w * yy) - logFy

    omega = _bisect(log_ratio, lo / yy, np.ones_like(yy), logq)
    drops = omega[:, :-1] - omega[:, 1:]
    return _report("quantile_scaled", drops, yy[:, :-1], yy[:, 1:], qs[:, 0], tol, y_grid)


def monotone_elasticity_check(F: Cdf, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> MonotonicityReport:
    """Check that t f'(t)/f(t) is non-decreasing.

    The elasticity is d log f / d log t, estimated by central secants of
    ``log f`` against ``log t`` on the grid.  If ``log f`` is convex in
    ``log t`` these secant slopes are monotone exactly, so truncation error
    cannot produce a false failure; density jumps show up as a spike
    followed by a drop.
    """
    _check_grid(grid)
    lo, hi = F.support_lo, F.support_hi
    ts = _interior(lo, hi, grid)
    if ts[0] <= 0:
        raise DomainError("elasticity grid must stay at positive values")
    dens = F.f(ts)
    if np.any(~np.isfinite(dens)) or np.any(dens <= 0):
        raise InvalidDistributionError("density must be finite and positive on the check grid")
    s = np.log(ts)
    g = np.log(dens)
    elasticity = (g[2:] - g[:-2]) / (s[2:] - s[:-2])
    drops = elasticity[:-1] - elasticity[1:]
    mids = ts[1:-1]
    return _report("elasticity", drops[None, :], mids[None, :-1], mids[None, 1:], [0.0], tol, grid)


# ---------------------------------------------------------------------------
# relative values under power-scaled items


def _validate_subset(family: PowerScaledProduct, b) -> tuple:
    b = tuple(sorted(set(int(j) for j in b)))
    if not b or len(b) >= family.n or b[0] < 0 or b[-1] >= family.n:
        raise DomainError(f"subset {b} must be non-empty and not the grand bundle")
    return b


def relative_value_conditional_cdf(family: PowerScaledProduct, b, omega, y):
    """Pr[max_{j in b} t_j <= omega * max(t) | max(t) = y].

    Equals ``(A_bbar / A) * (F(omega y) / F(y)) ** A_b`` for omega < 1 and
    jumps to 1 at omega = 1 (the grand-bundle item may lie in b).
    """
    b = _validate_subset(family, b)
    omega = np.asarray(omega, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((omega < 0) | (omega > 1)):
        raise DomainError("omega must lie in [0, 1]")
    A = family.A
    A_b = family.A_b(b)
    lead = (A - A_b) / A
    logr = family.base.logF(omega * y) - family.base.logF(y)
    with np.errstate(over="ignore"):
        val = lead * np.exp(A_b * logr)
    out = np.where(omega >= 1.0, 1.0, val)
    return out if out.ndim else float(out)


def relative_value_conditional_cdf_mc(family: PowerScaledProduct, b, omega: float, y: float,
                                      samples: int = 1_000_000, eps: float = 1e-3,
                                      seed: int = 0) -> dict:
    """Monte Carlo estimate of the conditional CDF with a band around max = y.

    The zero-probability event ``max(t) = y`` is replaced by
    ``|max(t) - y| <= eps``; the estimate is repeated at ``eps/2`` so the
    caller can see whether the band has converged.  Returns the estimate,
    its standard error, the half-band estimate and the sample counts.
    """
    b = _validate_subset(family, b)
    rng = np.random.default_rng(seed)
    t = family.sample(rng, samples)
    top = t.max(axis=1)
    ratio = t[:, list(b)].max(axis=1) / top
    out = {}
    for tag, width in (("eps", eps), ("half_eps", eps / 2)):
        band = np.abs(top - y) <= width
        k = int(band.sum())
        if k == 0:
            raise NumericalError("no samples landed in the conditioning band", y=y, eps=width)
        hit = ratio[band] <= omega
        p = float(hit.mean())
        out[tag] = {"estimate": p, "stderr": math.sqrt(max(p * (1 - p), 1.0 / k) / k), "count": k}
    return {
        "estimate": out["eps"]["estimate"],
        "stderr": out["eps"]["stderr"],
        "count": out["eps"]["count"],
        "half_band": out["half_eps"],
    }


def stochastic_relative_values_check(family: PowerScaledProduct, q_grid: int = 64, y_grid: int = 64,
                                     tol: float = DEFAULT_TOL) -> MonotonicityReport:
    """Check that every conditional quantile of the relative values rises with y.

    For each proper subset b and each level q in ``(0, A_bbar/A)`` the
    conditional CDF is inverted in omega by bisection at every grid y; the
    resulting omega(y) must be non-decreasing.  Witness is
    ``[subset index, y_left, y_right]``.
    """
    _check_grid(q_grid)
    _check_grid(y_grid)
    base = family.base
    lo, hi = base.support_lo, base.support_hi
    ys = (lo + (hi - lo) * np.arange(1, y_grid + 1) / y_grid)[None, :]
    worst = 0.0
    witness: list = []
    A = family.A
    for index, b in enumerate(family.proper_subsets()):
        cap = (A - family.A_b(b)) / A
        qs = _interior(0.0, cap, q_grid)[:, None]
        qq, yy = np.broadcast_arrays(qs, ys)

        def cond(w, b=b, yy=yy):
            return relative_value_conditional_cdf(family, b, np.minimum(w, 1 - 1e-16), yy)

        omega = _bisect(cond, np.zeros_like(yy) + lo / yy, np.ones_like(yy), qq)
        drops = omega[:, :-1] - omega[:, 1:]
        k = np.unravel_index(int(np.argmax(drops)), drops.shape)
        if drops[k] > worst:
            worst = float(drops[k])
            witness = [float(index), float(yy[k]), float(yy[k[0], k[1] + 1])]
    passed = worst <= tol
    return MonotonicityReport("stochastic_relative_values", passed, worst, witness if not passed else [], y_grid)
