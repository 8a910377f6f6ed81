import numpy as np
import pytest

from unitdemand import distributions as D
from unitdemand.amd import (
    GridProblem,
    MenuMechanism,
    MenuOptimizerParams,
    allocation_heatmap,
    build_grid,
    bundles,
    evaluate_mechanism,
    sale_boundary,
    solve_lp_exact,
    solve_menu,
)
from unitdemand.errors import DomainError, InternalInvariantError

UNIFORM_REVENUE = 2 * 3**-1.5
FAST = MenuOptimizerParams(iterations=300, restarts=2, batch_log2=12, validation_log2=13, evaluation_log2=15)


def brute_ic_ir(sol):
    """Largest IC and IR violation by direct enumeration of every pair."""
    T, a, pay = sol.types, sol.allocation, sol.payment
    own = np.einsum("td,td->t", a, T) - pay
    worst_ic = 0.0
    for i in range(len(T)):
        dev = a @ T[i] - pay
        worst_ic = max(worst_ic, float(np.max(dev - own[i])))
    return worst_ic, float(max(-own.min(), 0.0))


@pytest.fixture(scope="module")
def lp21():
    return solve_lp_exact(build_grid([D.uniform(0, 1)] * 2, 21, "left"))


class TestGrid:
    def test_left_placement_masses(self):
        g = build_grid([D.uniform(0, 1)], 5, "left")
        np.testing.assert_allclose(g.axes[0], [0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(g.weights, [0.25, 0.25, 0.25, 0.25, 0.0])

    def test_center_placement(self):
        g = build_grid([D.uniform(0, 1)] * 2, 4)
        assert g.shape == (4, 4)
        np.testing.assert_allclose(g.weights, np.full(16, 1 / 16))

    def test_nonuniform_weights(self):
        g = build_grid([D.power(2.0)], 3, "center")
        np.testing.assert_allclose(g.weights, [1 / 9, 3 / 9, 5 / 9])

    def test_bad_resolution(self):
        with pytest.raises(DomainError):
            build_grid([D.uniform(0, 1)], 1, "left")

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InternalInvariantError):
            GridProblem(1, np.zeros((2, 1)), np.array([0.5, 0.6]))


class TestLp:
    def test_single_type(self):
        sol = solve_lp_exact(GridProblem.from_types([[0.7, 0.3]]))
        assert sol.objective == pytest.approx(0.7, abs=1e-9)
        np.testing.assert_allclose(sol.allocation[0], [1, 0], atol=1e-9)

    def test_uniform_within_two_percent(self, lp21):
        assert abs(lp21.objective - UNIFORM_REVENUE) / UNIFORM_REVENUE <= 0.02
        assert lp21.status == "optimal"

    def test_ic_ir_by_enumeration(self, lp21):
        ic, ir = brute_ic_ir(lp21)
        assert ic <= 1e-8 and ir <= 1e-8

    def test_cutting_plane_matches_full(self):
        grid = build_grid([D.uniform(0, 1)] * 2, 7, "left")
        a = solve_lp_exact(grid, method="cutting_plane")
        b = solve_lp_exact(grid, method="full")
        assert a.objective == pytest.approx(b.objective, abs=1e-8)

    def test_resolution_doubling_does_not_lose_revenue(self):
        coarse = solve_lp_exact(build_grid([D.uniform(0, 1)] * 2, 11, "left")).objective
        fine = solve_lp_exact(build_grid([D.uniform(0, 1)] * 2, 21, "left")).objective
        assert fine >= coarse - 1e-3

    def test_cap(self):
        grid = build_grid([D.uniform(0, 1)] * 2, 42, "center")
        with pytest.raises(DomainError):
            solve_lp_exact(grid)

    def test_menu_reproduces_lp(self, lp21):
        rev, _ = evaluate_mechanism(lp21.to_menu(), lp21.grid)
        assert rev == pytest.approx(lp21.objective, abs=1e-6)


class TestEvaluate:
    grid = build_grid([D.uniform(0, 1)] * 2, 21, "left")

    def test_null_menu(self):
        menu = MenuMechanism.from_item_lotteries(np.zeros((0, 2)), np.zeros(0))
        assert evaluate_mechanism(menu, self.grid)[0] == 0.0

    def test_single_item_option(self):
        p = 0.45
        menu = MenuMechanism.from_item_lotteries([[1.0, 0.0]], [p])
        expected = p * self.grid.weights[self.grid.types[:, 0] >= p].sum()
        assert evaluate_mechanism(menu, self.grid)[0] == pytest.approx(expected, abs=1e-15)

    def test_uniform_price_converges(self):
        menu = MenuMechanism.uniform_price(2, 3**-0.5)
        errs = [abs(evaluate_mechanism(menu, build_grid([D.uniform(0, 1)] * 2, r, "center"))[0] - UNIFORM_REVENUE)
                for r in (20, 80, 320)]
        assert errs[2] < errs[1] < errs[0]
        assert errs[2] < 2e-3

    def test_brute_force_tie_rule(self):
        rng = np.random.default_rng(1)
        n = 2
        B = len(bundles(n))
        w = rng.dirichlet(np.ones(B + 1), size=5)[:, :B]
        prices = rng.uniform(0, 1, 5)
        # a grand-bundle option at 0.5 ties with walking away wherever max(t) = 0.5
        w = np.vstack([w, [0, 0, 1.0]])
        prices = np.append(prices, 0.5)
        menu = MenuMechanism(n, w, prices)
        grid = build_grid([D.uniform(0, 1)] * 2, 21, "left")
        rev, choice = evaluate_mechanism(menu, grid)
        paid = []
        for t, ch in zip(grid.types, choice):
            utils = [0.0] + [float(np.dot(row, [t[0], t[1], t.max()])) - pr for row, pr in zip(w, prices)]
            best = max(utils)
            tied = [k for k, u in enumerate(utils) if u >= best - 1e-12]
            pick = max(tied, key=lambda k: (0.0 if k == 0 else prices[k - 1], -k))
            assert pick == ch
            paid.append(0.0 if pick == 0 else prices[pick - 1])
        # same choices and the same reduction give the same bits
        assert rev == float(np.dot(grid.weights, paid))

    def test_tie_goes_to_higher_price(self):
        menu = MenuMechanism.from_item_lotteries([[0.5, 0.0], [1.0, 0.0]], [0.2, 0.6])
        # at t1 = 0.8 both give utility 0.2
        assert menu.best_response(np.array([[0.8, 0.0]]))[0] == 2


class TestMenuOptimizer:
    def test_single_option_finds_bundle_price(self):
        menu = solve_menu([D.uniform(0, 1)] * 2, 1, FAST)
        assert menu.meta["revenue_estimate"] == pytest.approx(UNIFORM_REVENUE, abs=3e-3)
        assert menu.prices[0] == pytest.approx(3**-0.5, abs=0.03)

    def test_deterministic(self):
        a = solve_menu([D.uniform(0, 1)] * 2, 2, FAST)
        b = solve_menu([D.uniform(0, 1)] * 2, 2, FAST)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.prices, b.prices)

    def test_bounded_by_lp(self, lp21):
        menu = solve_menu([D.uniform(0, 1)] * 2, 2, FAST)
        rev, _ = evaluate_mechanism(menu, lp21.grid)
        assert rev <= lp21.objective + 1e-9

    def test_bad_size(self):
        with pytest.raises(DomainError):
            solve_menu([D.uniform(0, 1)] * 2, 0, FAST)


class TestHeatmap:
    def test_uniform_price_pattern(self):
        p = 0.6
        menu = MenuMechanism.uniform_price(2, p)
        xs = np.linspace(0, 1, 11)
        hm = allocation_heatmap(menu, 0, None, (xs, xs))
        X, Y = np.meshgrid(xs, xs)
        expected = ((X >= Y) & (X >= p)).astype(float)
        np.testing.assert_array_equal(hm.matrix, expected)

    def test_lp_boundary(self, lp21):
        maps = [allocation_heatmap(lp21, j) for j in range(2)]
        b = sale_boundary(maps[:1])
        assert abs(b["price"] - 3**-0.5) <= 0.05

    def test_three_item_slice(self):
        menu = MenuMechanism.uniform_price(3, 1.45)
        xs = np.linspace(1, 2, 21)
        hm = allocation_heatmap(menu, 0, {2: 1.2}, (xs, xs))
        assert hm.matrix.shape == (21, 21)
        assert sale_boundary([hm])["mismatches"] == 0

    def test_bad_slice(self):
        menu = MenuMechanism.uniform_price(3, 1.45)
        with pytest.raises(DomainError):
            allocation_heatmap(menu, 0, None, (np.zeros(2), np.zeros(2)))

    def test_lp_slice_off_grid(self):
        sol = solve_lp_exact(build_grid([D.uniform_shift(1.0)] * 3, 4, "left"))
        with pytest.raises(DomainError):
            allocation_heatmap(sol, 0, {2: 1.2})
