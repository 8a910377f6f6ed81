"""Seeded corpus of valid CDFs with lower support end 0, shared by several tests."""

import numpy as np

from unitdemand import distributions as D


def random_table(rng, knots):
    xs = np.concatenate([[0.0], np.sort(rng.uniform(0.02, 0.98, knots - 2)), [1.0]])
    steps = rng.gamma(1.0, size=knots - 1)
    Fs = np.concatenate([[0.0], np.cumsum(steps) / steps.sum()])
    return {"kind": "table", "x": xs.tolist(), "F": Fs.tolist()}


def corpus_specs(size=50, seed=20240611):
    """``size`` distribution specs: power laws, betas, truncated exponentials and tables."""
    rng = np.random.default_rng(seed)
    specs = []
    makers = (
        lambda: {"kind": "power", "alpha": float(rng.uniform(0.3, 4.0)), "hi": float(rng.uniform(0.5, 3.0))},
        lambda: {"kind": "beta", "a": float(rng.uniform(0.5, 4.0)), "b": float(rng.uniform(0.5, 4.0))},
        lambda: {"kind": "truncated_exponential", "rate": float(rng.uniform(-4.0, 4.0)), "lo": 0.0, "hi": 1.0},
        lambda: random_table(rng, int(rng.integers(3, 8))),
    )
    while len(specs) < size:
        specs.append(makers[len(specs) % len(makers)]())
    return specs


def corpus(size=50, seed=20240611):
    return [D.from_spec(s) for s in corpus_specs(size, seed)]
