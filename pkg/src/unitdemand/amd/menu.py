"""Menus of priced lotteries and a first-order menu optimizer.

By the taxation principle every incentive-compatible mechanism for one buyer
is a menu: the buyer picks the option with the highest utility, or walks
away.  For a unit-demand buyer an option here is a lottery over bundles,
``s_b >= 0`` with ``sum_b s_b <= 1``; receiving bundle ``b`` is worth
``max_{j in b} t_j``.  Plain item lotteries are the singleton-bundle case and
uniform pricing is the grand bundle at one price.

The optimizer relaxes the buyer's argmax into a softmax with inverse
temperature ``kappa`` that grows geometrically during training, in the
style of RochetNet, but with the menu entries as free parameters rather
than a network.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from ..distributions import Cdf
from ..errors import DomainError, NumericalError
from .grid import GridProblem

__all__ = [
    "MenuMechanism",
    "MenuOptimizerParams",
    "bundles",
    "bundle_features",
    "evaluate_mechanism",
    "evaluate_mechanism_mc",
    "solve_menu",
]

TIE_TOL = 1e-12


def bundles(n: int) -> tuple:
    """Nonempty item subsets, by size then lexicographically; the grand bundle is last."""
    return tuple(b for r in range(1, n + 1) for b in itertools.combinations(range(n), r))


def bundle_features(types: np.ndarray, bundle_list) -> np.ndarray:
    """Value of every bundle at every type, shape ``(m, len(bundle_list))``."""
    types = np.atleast_2d(np.asarray(types, dtype=float))
    return np.stack([types[:, list(b)].max(axis=1) for b in bundle_list], axis=1)


@dataclass(frozen=True)
class MenuMechanism:
    n: int
    weights: np.ndarray
    prices: np.ndarray
    bundle_list: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bl = tuple(tuple(b) for b in self.bundle_list) or bundles(self.n)
        w = np.atleast_2d(np.asarray(self.weights, dtype=float)).reshape(-1, len(bl))
        p = np.asarray(self.prices, dtype=float).reshape(-1)
        if w.shape[0] != p.shape[0]:
            raise DomainError("one price per option is required")
        if np.any(w < -1e-15) or np.any(w.sum(axis=1) > 1 + 1e-9):
            raise DomainError("option lotteries must be nonnegative with total at most 1")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DomainError("prices must be finite and nonnegative")
        object.__setattr__(self, "bundle_list", bl)
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))
        object.__setattr__(self, "prices", p)

    @classmethod
    def uniform_price(cls, n: int, price: float) -> "MenuMechanism":
        bl = bundles(n)
        w = np.zeros((1, len(bl)))
        w[0, -1] = 1.0
        return cls(n, w, [price], bl)

    @classmethod
    def from_item_lotteries(cls, qs, prices) -> "MenuMechanism":
        """Options that give item ``j`` with probability ``q[j]``."""
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        n = qs.shape[1]
        bl = bundles(n)
        w = np.zeros((len(qs), len(bl)))
        w[:, :n] = qs
        return cls(n, w, prices, bl)

    @property
    def size(self) -> int:
        return len(self.prices)

    def option_values(self, types) -> np.ndarray:
        return bundle_features(types, self.bundle_list) @ self.weights.T

    def utilities(self, types) -> np.ndarray:
        """Utility of the null option (column 0) and of every option."""
        vals = self.option_values(types) - self.prices[None, :]
        return np.concatenate([np.zeros((vals.shape[0], 1)), vals], axis=1)

    def best_response(self, types, tie_tol: float = TIE_TOL) -> np.ndarray:
        """Chosen option per type, 0 for the null option.

        Options within ``tie_tol`` of the best utility are tied and the one
        with the highest price wins; among equal prices the first listed.
        """
        U = self.utilities(types)
        P = np.concatenate([[0.0], self.prices])
        best = U.max(axis=1, keepdims=True)
        cand = np.where(U >= best - tie_tol, P[None, :], -np.inf)
        return cand.argmax(axis=1)

    def allocation(self, types, choice: Optional[np.ndarray] = None) -> np.ndarray:
        """Probability that each item is allocated, shape ``(m, n)``.

        Inside a bundle the buyer takes a favourite item; ties go to the
        lowest index.
        """
        types = np.atleast_2d(np.asarray(types, dtype=float))
        if choice is None:
            choice = self.best_response(types)
        out = np.zeros_like(types)
        sold = choice > 0
        if not sold.any():
            return out
        w = self.weights[choice[sold] - 1]
        t = types[sold]
        for k, b in enumerate(self.bundle_list):
            fav = np.asarray(b)[np.argmax(t[:, list(b)], axis=1)]
            out_rows = np.flatnonzero(sold)
            np.add.at(out, (out_rows, fav), w[:, k])
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "bundles": [list(b) for b in self.bundle_list],
            "options": [{"lottery": [float(x) for x in row], "price": float(p)}
                        for row, p in zip(self.weights, self.prices)],
            "meta": self.meta,
        }


def evaluate_mechanism(menu: MenuMechanism, grid: GridProblem):
    """Expected revenue on a grid and the chosen option per type (0 = walk away)."""
    choice = menu.best_response(grid.types)
    P = np.concatenate([[0.0], menu.prices])
    return float(np.dot(grid.weights, P[choice])), choice


def evaluate_mechanism_mc(menu: MenuMechanism, dists: Sequence[Cdf], log2_samples: int = 20,
                          seed: int = 12345) -> float:
    """Expected revenue under the continuous distributions, by scrambled Sobol sampling."""
    u = qmc.Sobol(menu.n, scramble=True, seed=seed).random_base2(log2_samples)
    t = np.column_stack([d.ppf(u[:, j]) for j, d in enumerate(dists)])
    choice = menu.best_response(t)
    P = np.concatenate([[0.0], menu.prices])
    return float(P[choice].mean())


@dataclass(frozen=True)
class MenuOptimizerParams:
    """Hyperparameters of :func:`solve_menu`.

    The defaults were tuned on two items; the temperature starts at 50 rather
    than 10 because a cooler start lets several options collapse onto the
    grand bundle before lotteries have a chance to separate.
    """

    iterations: int = 2000
    batch_log2: int = 14
    kappa_start: float = 50.0
    kappa_end: float = 5000.0
    lr_start: float = 0.05
    lr_end: float = 0.002
    restarts: int = 4
    seed: int = 0
    validation_log2: int = 16
    evaluation_log2: int = 20

    def __post_init__(self):
        if self.iterations < 2 or self.restarts < 1:
            raise DomainError("need at least 2 iterations and 1 restart")
        if not (0 < self.kappa_start <= self.kappa_end):
            raise DomainError("temperature schedule must be positive and non-decreasing")


def _softmax(z, axis=-1):
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _sample(dists, rng, size):
    u = rng.random((size, len(dists)))
    return np.column_stack([d.ppf(u[:, j]) for j, d in enumerate(dists)])


def _init(rng, K, B, n, V_grand):
    z = rng.normal(0.0, 0.5, (K, B + 1))
    for k in range(K):
        if k % 2 == 1:
            z[k, 1:n + 1] += 3.0  # item lotteries
        else:
            z[k, 1 + (B - 1 - (k // 2) % B)] += 3.0  # bundles, grand bundle first
    levels = 0.05 + 0.9 * rng.permutation((np.arange(K) + 0.5) / K)
    price = np.quantile(V_grand, levels)
    return z, price


def solve_menu(dists: Sequence[Cdf], menu_size: int, opt: Optional[MenuOptimizerParams] = None) -> MenuMechanism:
    """Search for a revenue-maximizing menu with ``menu_size`` options.

    All restarts are trained together on one batch of types; each restart is
    then scored by its exact (hard argmax) revenue on an independent
    validation sample and the best one is returned.  ``meta`` records the
    validation scores and a quasi-Monte Carlo revenue estimate.
    """
    opt = opt or MenuOptimizerParams()
    dists = list(dists)
    n = len(dists)
    if n < 1 or menu_size < 1:
        raise DomainError("need at least one item and one option")
    K = int(menu_size)
    R = opt.restarts
    bl = bundles(n)
    B = len(bl)
    rng = np.random.default_rng(opt.seed)
    S = 2**opt.batch_log2
    V = bundle_features(_sample(dists, rng, S), bl)
    Vt = np.ascontiguousarray(V.T)
    z = np.empty((R, K, B + 1))
    price = np.empty((R, K))
    for r in range(R):
        z[r], price[r] = _init(np.random.default_rng([opt.seed, r]), K, B, n, V[:, -1])

    params = [z, price]
    m1 = [np.zeros_like(z), np.zeros_like(price)]
    m2 = [np.zeros_like(z), np.zeros_like(price)]
    b1, b2, eps = 0.9, 0.999, 1e-8
    started = time.perf_counter()
    for it in range(opt.iterations):
        frac = it / (opt.iterations - 1)
        kappa = opt.kappa_start * (opt.kappa_end / opt.kappa_start) ** frac
        step = opt.lr_start * (opt.lr_end / opt.lr_start) ** frac
        z, price = params
        sf = _softmax(z)
        s = sf[..., 1:]
        # option axis in the middle keeps reductions over long contiguous rows
        logits = kappa * (s @ Vt - price[..., None])
        top = np.maximum(logits.max(axis=1, keepdims=True), 0.0)
        ex = np.exp(logits - top)
        W = ex / (ex.sum(axis=1, keepdims=True) + np.exp(-top))
        rev = (W * price[..., None]).sum(axis=1)
        if not np.all(np.isfinite(rev)):
            raise NumericalError("menu objective became non-finite", iteration=it, kappa=kappa)
        G = (kappa / S) * W * (price[..., None] - rev[:, None, :])
        gs = np.concatenate([np.zeros((R, K, 1)), G @ V], axis=2)
        gz = sf * (gs - (sf * gs).sum(axis=-1, keepdims=True))
        gp = W.sum(axis=-1) / S - G.sum(axis=-1)
        for i, g in enumerate((gz, gp)):
            m1[i] = b1 * m1[i] + (1 - b1) * g
            m2[i] = b2 * m2[i] + (1 - b2) * g * g
            mh = m1[i] / (1 - b1 ** (it + 1))
            vh = m2[i] / (1 - b2 ** (it + 1))
            params[i] = params[i] + step * mh / (np.sqrt(vh) + eps)
        params[1] = np.maximum(params[1], 0.0)
    z, price = params
    weights = _softmax(z)[..., 1:]

    val_types = _sample(dists, np.random.default_rng([opt.seed, 7919]), 2**opt.validation_log2)
    val_grid = GridProblem.from_types(val_types)
    scores = []
    candidates = []
    for r in range(R):
        menu = MenuMechanism(n, weights[r], price[r], bl)
        candidates.append(menu)
        scores.append(evaluate_mechanism(menu, val_grid)[0])
    best = int(np.argmax(scores))
    chosen = candidates[best]
    meta = {
        "params": asdict(opt),
        "menu_size": K,
        "validation_revenue": [float(x) for x in scores],
        "chosen_restart": best,
        "revenue_estimate": evaluate_mechanism_mc(chosen, dists, opt.evaluation_log2, seed=opt.seed + 101),
        "train_seconds": time.perf_counter() - started,
    }
    return MenuMechanism(n, chosen.weights, chosen.prices, bl, meta)
