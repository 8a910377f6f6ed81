"""The signed measure of the dual problem for i.i.d. ``U[c, c+1]`` items.

On ``X = [c, c+1]**n`` the measure has four pieces: a unit point mass at
``(c, ..., c)``, density ``-(n+1)`` on the cube, ``+(c+1)`` on each top face
``x_i = c+1`` and ``-c`` on each bottom face ``x_i = c``.  Its positive part
lives on the point and the top faces, its negative part on the cube and the
bottom faces.

``gamma_1`` moves the negative mass sitting at ``max(y) >= p`` straight up
along the diagonal until the largest coordinate reaches ``c+1``.  On the face
``B_1 = {x_1 = c+1 = max(x)}`` it has density

    (n+1)(c+1-p)          if min(x_2..x_n) >= 2c+1-p
    (n+1)(min(x) - c) + c otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from ..errors import DomainError, InternalInvariantError
from ..pricing import uniform_bundle_price
from ..quadrature import DEFAULT_ORDER, anchored_cube_integral

__all__ = [
    "TransformedMeasure",
    "RegionGeometry",
    "UpperSetStaircase",
    "uniform_pricing_utility",
    "integrate_against_mu",
    "pushed_density",
    "pushed_density_eval",
    "push_set_membership",
    "pushforward_face_mass",
]


@dataclass(frozen=True)
class TransformedMeasure:
    n: int
    c: float
    point_mass: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        if self.c < 0:
            raise DomainError(f"c must be nonnegative, got {self.c}")
        if abs(self.total_mass()) > 1e-12 * max(1.0, self.positive_mass()):
            raise InternalInvariantError("transformed measure does not have zero total mass")

    @property
    def volume_density(self) -> float:
        return -(self.n + 1.0)

    @property
    def top_face_density(self) -> float:
        return self.c + 1.0

    @property
    def bottom_face_density(self) -> float:
        return -float(self.c)

    @property
    def point(self) -> np.ndarray:
        return np.full(self.n, float(self.c))

    def positive_mass(self) -> float:
        return self.point_mass + self.n * self.top_face_density

    def negative_mass(self) -> float:
        return -(self.volume_density + self.n * self.bottom_face_density)

    def total_mass(self) -> float:
        return self.point_mass + self.volume_density + self.n * (self.top_face_density + self.bottom_face_density)


class RegionGeometry:
    """Regions of ``X`` cut out by the bundle price ``p``.

    ``W``: ``p < max <= c+1``; ``Z``: ``c <= max <= p``; ``B``: ``max = c+1``;
    ``B_Z``: ``max = p``; ``B_i``: ``x_i = c+1``; ``D_n``: ``x_1 = c+1 >= x_2
    >= ... >= x_n``.  Predicates take one point.  With :class:`Fraction`
    coordinates every comparison is exact (``p`` and ``c`` are converted
    exactly from their binary values).
    """

    def __init__(self, n: int, c: float, p: Optional[float] = None):
        if int(n) != n or n < 2:
            raise DomainError(f"n must be an integer >= 2, got {n}")
        self.n = int(n)
        self.c = float(c)
        self.p = float(p) if p is not None else uniform_bundle_price(self.c, self.n)[0]
        if not (self.c < self.p < self.c + 1):
            raise DomainError("p must lie strictly inside (c, c+1)")

    @property
    def split(self) -> float:
        """``2c+1-p``: the minimum above which the pushed density is flat."""
        return 2 * self.c + 1 - self.p

    def _coerce(self, x):
        x = tuple(x)
        if len(x) != self.n:
            raise DomainError(f"expected a point with {self.n} coordinates")
        if any(isinstance(v, Fraction) for v in x):
            return tuple(Fraction(v) for v in x), Fraction(self.c), Fraction(self.p)
        return tuple(float(v) for v in x), self.c, self.p

    def in_X(self, x) -> bool:
        x, c, _ = self._coerce(x)
        return all(c <= v <= c + 1 for v in x)

    def in_W(self, x) -> bool:
        x, c, p = self._coerce(x)
        return self.in_X(x) and p < max(x) <= c + 1

    def in_Z(self, x) -> bool:
        x, c, p = self._coerce(x)
        return self.in_X(x) and c <= max(x) <= p

    def in_B(self, x) -> bool:
        x, c, _ = self._coerce(x)
        return self.in_X(x) and max(x) == c + 1

    def in_BZ(self, x) -> bool:
        x, _, p = self._coerce(x)
        return self.in_X(x) and max(x) == p

    def in_Bi(self, x, i: int) -> bool:
        x, c, _ = self._coerce(x)
        return self.in_X(x) and x[i] == c + 1

    def in_Dn(self, x) -> bool:
        x, c, _ = self._coerce(x)
        return self.in_X(x) and x[0] == c + 1 and all(a >= b for a, b in zip(x, x[1:]))

    def face_index(self, x) -> Optional[int]:
        """Lowest ``i`` with ``x`` in ``B_i``; ties between faces go to the lower index."""
        x, c, _ = self._coerce(x)
        for i, v in enumerate(x):
            if v == c + 1:
                return i
        return None


def uniform_pricing_utility(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """Buyer utility ``max(max(x) - p, 0)`` of a posted bundle price ``p``."""

    def u(x):
        return np.maximum(np.max(np.asarray(x, dtype=float), axis=-1) - p, 0.0)

    u.breaks = (p,)
    return u


def integrate_against_mu(u: Callable[[np.ndarray], np.ndarray], tm: TransformedMeasure,
                         order: int = DEFAULT_ORDER, breaks: Sequence[float] = ()) -> float:
    """Integral of ``u`` against the transformed measure.

    ``u`` maps an ``(m, n)`` array to ``m`` values.  Cube and face integrals
    are anchored at the largest coordinate and split at ``breaks`` (plus a
    ``breaks`` attribute on ``u`` if present), so utilities that depend on
    ``max(x)`` are integrated without crossing a kink.
    """
    n, c = tm.n, tm.c
    hi = c + 1.0
    kinks = tuple(breaks) + tuple(getattr(u, "breaks", ()))
    point = float(np.asarray(u(tm.point[None, :]))[0])
    if not np.isfinite(point):
        raise DomainError("utility is not finite at the bottom corner")
    volume = anchored_cube_integral(u, c, hi, n, "max", kinks, order)

    def face(value):
        total = 0.0
        for i in range(n):
            def g(rest, i=i):
                return u(np.insert(rest, i, value, axis=1))
            total += anchored_cube_integral(g, c, hi, n - 1, "max", kinks, order)
        return total

    top = face(hi)
    bottom = face(c) if c != 0 else 0.0
    return tm.point_mass * point + tm.volume_density * volume + tm.top_face_density * top + \
        tm.bottom_face_density * bottom


def pushed_density(minimum, geom: RegionGeometry) -> np.ndarray:
    """Density of ``gamma_1`` on ``B_1`` as a function of ``min(x_2, ..., x_n)``."""
    m = np.asarray(minimum, dtype=float)
    n, c, p = geom.n, geom.c, geom.p
    flat = (n + 1) * (c + 1 - p)
    return np.where(m >= geom.split, flat, (n + 1) * (m - c) + c)


def pushed_density_eval(x, geom: RegionGeometry):
    """Density of ``gamma_1`` at a point (or ``(m, n)`` array of points) of ``B_1``."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != geom.n:
        raise DomainError(f"points must have {geom.n} coordinates")
    c = geom.c
    tol = 1e-12 * max(1.0, c + 1)
    on_face = (np.abs(pts[:, 0] - (c + 1)) <= tol) & np.all((pts >= c - tol) & (pts <= c + 1 + tol), axis=1)
    if not np.all(on_face):
        raise DomainError("point is not on the face x_1 = c+1")
    out = pushed_density(pts[:, 1:].min(axis=1), geom)
    return float(out[0]) if single else out


class UpperSetStaircase:
    """Upper set ``{z : z[-1] >= tau(z[:-1])}`` of the box ``[lo, hi]**dim``.

    ``tau`` is piecewise constant on ``resolution`` equal cells per leading
    axis and non-increasing along every axis, which makes the set closed
    upward.  ``+inf`` thresholds remove a cell, ``-inf`` keep all of it.
    """

    def __init__(self, lo: float, hi: float, dim: int, thresholds, resolution: Optional[int] = None):
        if dim < 1:
            raise DomainError("staircase dimension must be >= 1")
        tau = np.asarray(thresholds, dtype=float)
        if tau.ndim != dim - 1:
            raise DomainError(f"thresholds need {dim - 1} axes, got {tau.ndim}")
        if dim > 1:
            if len(set(tau.shape)) != 1:
                raise DomainError("threshold grid must have the same resolution on every axis")
            for ax in range(tau.ndim):
                if np.any(np.diff(tau, axis=ax) > 0):
                    raise DomainError("thresholds must be non-increasing along every axis")
        self.lo, self.hi, self.dim = float(lo), float(hi), int(dim)
        self.tau = tau
        self.resolution = tau.shape[0] if dim > 1 else (resolution or 1)

    @classmethod
    def constant(cls, lo, hi, dim, value, resolution: int = 1):
        shape = (resolution,) * (dim - 1)
        return cls(lo, hi, dim, np.full(shape, float(value)))

    @classmethod
    def everything(cls, lo, hi, dim):
        return cls.constant(lo, hi, dim, -np.inf)

    @classmethod
    def empty(cls, lo, hi, dim):
        return cls.constant(lo, hi, dim, np.inf)

    @classmethod
    def random(cls, rng: np.random.Generator, lo, hi, dim, resolution: int = 32, overshoot: float = 0.05):
        """Random staircase: uniform draws, made monotone by running minima."""
        width = hi - lo
        shape = (resolution,) * (dim - 1)
        tau = lo - overshoot * width + (1 + 2 * overshoot) * width * rng.random(shape)
        for ax in range(dim - 1):
            tau = np.minimum.accumulate(tau, axis=ax)
        return cls(lo, hi, dim, tau)

    def cells(self, lead: np.ndarray) -> np.ndarray:
        frac = (np.asarray(lead, dtype=float) - self.lo) / (self.hi - self.lo)
        return np.clip(np.floor(frac * self.resolution).astype(int), 0, self.resolution - 1)

    def threshold_at(self, lead) -> np.ndarray:
        """``tau`` at the leading coordinates, shape ``(m, dim-1)``."""
        lead = np.atleast_2d(np.asarray(lead, dtype=float))
        if self.dim == 1:
            return np.full(lead.shape[0], float(self.tau))
        idx = self.cells(lead)
        return self.tau[tuple(idx[:, k] for k in range(self.dim - 1))]

    def contains(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.dim:
            raise DomainError(f"points must have {self.dim} coordinates")
        inside = np.all((z >= self.lo) & (z <= self.hi), axis=1)
        tau = self.threshold_at(z[:, :-1]) if self.dim > 1 else np.full(z.shape[0], float(self.tau))
        return inside & (z[:, -1] >= tau)

    def cell_edges(self) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * np.arange(self.resolution + 1) / self.resolution


def push_set_membership(y, U: UpperSetStaircase, geom: RegionGeometry) -> bool:
    """Whether ``y`` is pushed into ``U``: ``y + t*1`` lies in ``U`` and ``B``.

    The shift is ``t = c+1 - max(y)``, the only one that lands on ``B``.
    ``y`` must lie in ``W`` or ``B_Z`` (``max(y) >= p``).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (geom.n,):
        raise DomainError(f"y must have {geom.n} coordinates")
    top = float(y.max())
    if top < geom.p or y.min() < geom.c or top > geom.c + 1:
        raise DomainError("y must lie in W or B_Z")
    x = y + (geom.c + 1 - top)
    return bool(U.contains(x[None, :])[0])


def pushforward_face_mass(geom: RegionGeometry, lows: Sequence[float], highs: Sequence[float],
                          samples: int = 2**20, seed: int = 0) -> float:
    """Negative mass moved onto the rectangle ``{c+1} x prod[lows, highs]`` of ``B_1``.

    Brute force: quasi-random points of the cube and of each bottom face are
    weighted by the negative density, pushed along the diagonal, and counted
    when they land in the rectangle.  Points whose largest coordinate is not
    the first one land on another face.
    """
    n, c, p = geom.n, geom.c, geom.p
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    if lows.shape != (n - 1,) or highs.shape != (n - 1,):
        raise DomainError(f"rectangle needs {n - 1} bounds per side")
    m = int(np.log2(samples))

    def landed(y):
        top = y.max(axis=1)
        first = (y[:, 0] >= y[:, 1:].max(axis=1)) & (top >= p)
        rest = y[:, 1:] + (c + 1 - top)[:, None]
        hit = first & np.all((rest >= lows) & (rest <= highs), axis=1)
        return hit.mean()

    cube = c + qmc.Sobol(n, scramble=True, seed=seed).random_base2(m)
    mass = (n + 1) * landed(cube)
    if c > 0:
        for j in range(1, n):
            pts = c + qmc.Sobol(n - 1, scramble=True, seed=seed + 1 + j).random_base2(m)
            y = np.insert(pts, j, c, axis=1)
            mass += c * landed(y)
    return float(mass)
