"""Acceptance suite: one test per headline criterion.

Each test records a ``PASS``/``FAIL`` line with its runtime; the lines are
printed in the terminal summary (see ``conftest.py``).  Run on its own with
``pytest tests/test_acceptance.py``.
"""

import itertools
import json
import math
import time

import numpy as np

from unitdemand import cli
from unitdemand import distributions as D
from unitdemand import pricing as P
from unitdemand.amd import build_grid, solve_lp_exact, solve_menu
from unitdemand.dual import (
    RegionGeometry,
    TransformedMeasure,
    certify,
    integrate_against_mu,
    pushforward_face_mass,
    uniform_pricing_utility,
)

from corpus import corpus
from oracles import face_mass_by_quadrature, random_rectangle

UNIFORM_REVENUE = 2 * 3**-1.5  # p(1 - p**2) at p = 3**-0.5


def record(log, label, check, budget=None):
    """Run ``check() -> (ok, detail)``, log one line, and fail the test when not ok."""
    started = time.perf_counter()
    ok, detail = check()
    seconds = time.perf_counter() - started
    if budget is not None and seconds >= budget:
        ok = False
        detail += f"; over the {budget:g} s budget"
    log.append(f"{'PASS' if ok else 'FAIL'}  {label}  [{seconds:.2f} s]  {detail}")
    assert ok, detail


def lp_objective(c, resolution):
    return solve_lp_exact(build_grid([D.uniform_shift(c)] * 2, resolution, "left")).objective


def best_grid_uniform_revenue(c, resolution):
    """Best posted grand-bundle price on the same grid the LP sees."""
    grid = build_grid([D.uniform_shift(c)] * 2, resolution, "left")
    top = grid.types.max(axis=1)
    prices = np.unique(top)
    return max(float(p * grid.weights[top >= p].sum()) for p in prices)


class TestAcceptance:
    def test_thresholds_exact(self, acceptance_log):
        def check():
            P._c_star_cached.cache_clear()  # time a cold computation
            c2, c3, c4 = (P.threshold_c_star(n).c_star for n in (2, 3, 4))
            ok = abs(c2 - 1) <= 1e-10 and abs(c3 - (11 - math.sqrt(33)) / 4) <= 1e-10 and abs(c4 - 1.57) <= 0.01
            return ok, f"c2={c2:.15f} c3={c3:.15f} c4={c4:.6f}"

        record(acceptance_log, "thresholds exact", check, budget=1.0)

    def test_threshold_properties(self, acceptance_log):
        def check():
            P._c_star_cached.cache_clear()  # time a cold computation
            cs = np.array([P.threshold_c_star(n).c_star for n in range(2, 51)])
            bound = np.log(np.arange(2, 51)) / 3
            increasing = bool(np.all(np.diff(cs) > 0))
            above = bool(np.all(cs > bound))
            return increasing and above, (f"strictly increasing={increasing}, above ln(n)/3={above}, "
                                          f"min gap to bound={np.min(cs - bound):.4f}")

        record(acceptance_log, "threshold properties n=2..50", check, budget=5.0)

    def test_price_closed_form(self, acceptance_log):
        def check():
            price_err = max(abs(P.bundle_price(D.uniform(0, 1), n).price - (n + 1) ** (-1 / n)) for n in range(2, 11))
            eq_err = 0.0
            for n in range(2, 51):
                c = P.threshold_c_star(n).c_star
                p = P.bundle_price(D.uniform_shift(c), n).price
                eq_err = max(eq_err, abs((n + 1) * (c + 1 - p) - (c + 1)))
            return price_err <= 1e-10 and eq_err <= 1e-8, f"max price error={price_err:.2e}, " \
                                                           f"max definition gap={eq_err:.2e}"

        record(acceptance_log, "price closed form", check)

    def test_duality_revenue_identity(self, acceptance_log):
        def check():
            worst = 0.0
            for n, c in itertools.product((2, 3), (0.0, 0.5, 1.0, 2.0)):
                p = P.bundle_price(D.uniform_shift(c), n).price
                val = integrate_against_mu(uniform_pricing_utility(p), TransformedMeasure(n, c))
                worst = max(worst, abs(val - p * (1 - (p - c) ** n)))
            return worst <= 1e-6, f"max |int u* dmu - revenue| over 8 cases={worst:.2e}"

        record(acceptance_log, "duality revenue identity", check, budget=10.0)

    def test_pushed_density_oracle(self, acceptance_log):
        def check():
            worst = 0.0
            for n in (2, 3):
                geom = RegionGeometry(n, 0.5)
                rng = np.random.default_rng(100 + n)
                for k in range(20):
                    lows, highs = random_rectangle(rng, n, geom.c)
                    brute = pushforward_face_mass(geom, lows, highs, samples=2**20, seed=k)
                    exact = face_mass_by_quadrature(geom, lows, highs)
                    worst = max(worst, abs(brute - exact) / exact)
            return worst <= 1e-2, f"max relative error over 40 rectangles (c=0.5)={worst:.2e}"

        record(acceptance_log, "pushed-density oracle", check, budget=60.0)

    def test_dominance_triple_agreement(self, acceptance_log):
        def check():
            rows = []
            ok = True
            for n in (2, 3):
                cs = P.threshold_c_star(n).c_star
                for c in (0.0, 0.5, cs - 0.05, cs + 0.05, 1.5, 2.5):
                    rep = certify(n, c, samples=500, seed=0)
                    agree = [ch for ch in rep.checks if ch["check"] == "routes_agree"][0]
                    expected = "optimal" if c <= cs else "not_optimal"
                    ok &= agree["pass"] and rep.verdict == expected
                    rows.append(f"n={n} c={c:.3f}:{rep.verdict}")
            return ok, "; ".join(rows)

        record(acceptance_log, "dominance triple agreement", check, budget=120.0)

    def test_lp_sufficiency(self, acceptance_log):
        def check():
            r21 = lp_objective(0.0, 21)
            r41 = lp_objective(0.0, 41)
            d21 = abs(r21 - UNIFORM_REVENUE)
            d41 = abs(r41 - UNIFORM_REVENUE)
            ok = d21 / UNIFORM_REVENUE <= 0.02 and d41 < d21
            return ok, f"21x21={r21:.6f} ({100 * d21 / UNIFORM_REVENUE:.3f}%), 41x41={r41:.6f} " \
                       f"({100 * d41 / UNIFORM_REVENUE:.4f}%), target={UNIFORM_REVENUE:.6f}"

        record(acceptance_log, "LP sufficiency", check, budget=120.0)

    def test_lp_necessity(self, acceptance_log):
        def check():
            error = abs(lp_objective(0.5, 21) - lp_objective(0.5, 41))
            lp = lp_objective(1.5, 21)
            uniform = P.bundle_price(D.uniform_shift(1.5), 2).revenue
            on_grid = best_grid_uniform_revenue(1.5, 21)
            excess = lp - max(uniform, on_grid)
            return excess > error, f"LP={lp:.6f}, uniform={uniform:.6f} (best on grid {on_grid:.6f}), " \
                                   f"excess={excess:.2e} vs discretization error={error:.2e}"

        record(acceptance_log, "LP necessity", check)

    def test_menu_consistency(self, acceptance_log):
        def check():
            rev = {}
            for c, k in itertools.product((0.0, 1.5), (1, 8)):
                rev[c, k] = solve_menu([D.uniform_shift(c)] * 2, k).meta["revenue_estimate"]
            gap0 = abs(rev[0.0, 8] - rev[0.0, 1])
            ok = gap0 <= 1e-3 and rev[1.5, 8] > rev[1.5, 1]
            return ok, f"c=0: K8={rev[0.0, 8]:.6f} K1={rev[0.0, 1]:.6f} (gap {gap0:.1e}); " \
                       f"c=1.5: K8={rev[1.5, 8]:.6f} K1={rev[1.5, 1]:.6f}"

        record(acceptance_log, "menu optimizer consistency", check)

    def test_distribution_checkers(self, acceptance_log):
        def check():
            basic = [D.uniform(0, 1), D.uniform(0, 2.5)] + [D.power(a) for a in (0.3, 0.5, 2.0, 5.0)]
            basic_ok = all(D.scale_monotone_check(F).passed and D.quantile_scaled_check(F).passed and
                           D.monotone_elasticity_check(F).passed for F in basic)
            agree = implied = passes = 0
            dists = corpus(50)
            for F in dists:
                s = D.scale_monotone_check(F).passed
                q = D.quantile_scaled_check(F).passed
                e = D.monotone_elasticity_check(F).passed
                agree += s == q
                implied += (not e) or s
                passes += s
            ok = basic_ok and agree == len(dists) and implied == len(dists)
            return ok, f"uniform/power pass={basic_ok}; scale==quantile on {agree}/50; " \
                       f"elasticity=>scale on {implied}/50; scale-monotone in corpus={passes}/50"

        record(acceptance_log, "distribution checkers", check, budget=30.0)

    def test_figure_reproduction(self, acceptance_log, tmp_path):
        def check():
            code = cli.main(["reproduce-figures", "--outdir", str(tmp_path)])
            results = json.loads((tmp_path / "results.json").read_text())
            tables = sorted(p.name for p in (tmp_path / "tables").iterdir())
            ok = code == 0 and set(results) == {"fig2", "fig3", "fig4"} and len(tables) == 2 + 2 + 9
            ok = ok and all(r["within_one_cell"] for r in results.values())
            parts = [f"{k}: {r['boundary_price']:.3f} vs {r['oracle_price']:.4f} (cell {r['cell_width']:.3f})"
                     for k, r in sorted(results.items())]
            return ok, "; ".join(parts)

        record(acceptance_log, "figure reproduction", check)
