import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitdemand import distributions as D
from unitdemand import pricing as P
from unitdemand.errors import DomainError, NumericalError

mp.mp.dps = 40


def golden_section_max(g, a, b, tol=mp.mpf("1e-30")):
    """Maximize a unimodal ``g`` on ``[a, b]`` in high precision."""
    inv = (mp.sqrt(5) - 1) / 2
    x1, x2 = b - inv * (b - a), a + inv * (b - a)
    g1, g2 = g(x1), g(x2)
    while b - a > tol:
        if g1 < g2:
            a, x1, g1 = x1, x2, g2
            x2 = a + inv * (b - a)
            g2 = g(x2)
        else:
            b, x2, g2 = x2, x1, g1
            x1 = b - inv * (b - a)
            g1 = g(x1)
    return (a + b) / 2


def oracle_price(c, n):
    c = mp.mpf(c)
    return float(golden_section_max(lambda q: q * (1 - (q - c) ** n), c, c + 1))


def mp_T(c, n):
    c = mp.mpf(c)
    return (n + 1) ** n - (n - c) ** n - n**2 * (c + 1) * (n - c) ** (n - 1)


class TestH:
    @pytest.mark.parametrize("c,n", [(0.0, 2), (1.3, 3), (4.0, 7)])
    def test_at_c(self, c, n):
        assert P.h_eval(c, c, n) == 1.0

    @pytest.mark.parametrize("n", range(2, 8))
    def test_zero_at_closed_form(self, n):
        assert abs(P.h_eval(0.0, (n + 1) ** (-1 / n), n)) < 1e-14

    def test_bracket_end(self):
        assert P.h_eval(2.0, 3.0, 3) == pytest.approx(-3 * 3.0)

    def test_root_matches_oracle(self):
        p = oracle_price(1.0, 2)
        assert abs(P.h_eval(1.0, p, 2)) < 1e-12


class TestBundlePrice:
    @pytest.mark.parametrize("n", range(2, 11))
    def test_uniform_zero(self, n):
        res = P.bundle_price(D.uniform(0, 1), n)
        assert abs(res.price - (n + 1) ** (-1 / n)) <= 1e-10

    @pytest.mark.parametrize("c,n", [(1.0, 2), (0.5, 3), (2.5, 2), (1.0, 3), (0.25, 5)])
    def test_golden_section_oracle(self, c, n):
        res = P.bundle_price(D.uniform_shift(c), n)
        assert abs(res.price - oracle_price(c, n)) <= 1e-9
        assert res.residual <= 1e-12

    @pytest.mark.parametrize("c,n", [(0.0, 2), (0.7, 3), (1.5, 2)])
    def test_paths_agree(self, c, n):
        a = P.bundle_price(D.uniform_shift(c), n, path="uniform").price
        b = P.bundle_price(D.uniform_shift(c), n, path="general").price
        assert abs(a - b) <= 1e-9

    def test_general_distribution(self):
        # power items with exponents 1 and 1.5: the maximum is distributed as x**2.5
        res = P.bundle_price([D.power(1.0), D.power(1.5)])
        oracle = float(golden_section_max(lambda q: q * (1 - q**2.5), mp.mpf(0), mp.mpf(1)))
        assert res.price == pytest.approx(oracle, abs=1e-9)
        assert res.price == pytest.approx(3.5 ** (-1 / 2.5), abs=1e-9)

    def test_revenue_two_ways(self):
        for c, n in [(0.0, 2), (1.0, 3), (2.0, 4)]:
            F = D.uniform_shift(c)
            res = P.bundle_price(F, n)
            assert abs(res.revenue - P.revenue_by_quadrature(F, n, res.price)) <= 1e-8

    def test_rejects_bad_n(self):
        with pytest.raises(DomainError):
            P.bundle_price(D.uniform(0, 1), 1)

    def test_bimodal_profile_flagged(self):
        # half the mass just above 0.2 and half near 1: local maxima near 0.19 and 0.98
        F = D.table([0.0, 0.19, 0.21, 0.98, 1.0], [0.0, 0.01, 0.5, 0.51, 1.0])
        with pytest.raises(NumericalError) as info:
            P.bundle_price(F, 2)
        assert info.value.diagnostics["local_maxima"] >= 2


class TestPPrime:
    @pytest.mark.parametrize("c,n", [(0.3, 2), (1.0, 3), (2.0, 5)])
    def test_finite_difference(self, c, n):
        d = 1e-5
        hi = P.bundle_price(D.uniform_shift(c + d), n).price
        lo = P.bundle_price(D.uniform_shift(c - d), n).price
        p = P.bundle_price(D.uniform_shift(c), n).price
        assert (hi - lo) / (2 * d) == pytest.approx(P.p_prime(c, p, n), abs=1e-7)

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(0.01, 5.0), n=st.integers(2, 12))
    def test_range_and_derivative_sign(self, c, n):
        p = P.bundle_price(D.uniform_shift(c), n).price
        dp = P.p_prime(c, p, n)
        assert 0 < dp < 1
        assert dp - n / (n + 1) > 0

    def test_bad_price(self):
        with pytest.raises(DomainError):
            P.p_prime(1.0, 0.5, 2)


class TestThreshold:
    def test_two(self):
        assert abs(P.threshold_c_star(2).c_star - 1.0) <= 1e-10

    def test_three(self):
        assert abs(P.threshold_c_star(3).c_star - (11 - math.sqrt(33)) / 4) <= 1e-10

    def test_four(self):
        assert abs(P.threshold_c_star(4).c_star - 1.57) <= 0.01

    @pytest.mark.parametrize("n", [2, 5, 13, 40])
    def test_mpmath_root(self, n):
        lo, hi = mp.mpf(0), mp.mpf(n)
        assert mp_T(lo, n) < 0 < mp_T(hi, n)
        for _ in range(200):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if mp_T(mid, n) < 0 else (lo, mid)
        root = (lo + hi) / 2
        assert P.threshold_c_star(n).c_star == pytest.approx(float(root), abs=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 10, 50])
    def test_residual_relative(self, n):
        c = P.threshold_c_star(n).c_star
        assert abs(float(mp_T(c, n) / mp_T(0, n))) <= 1e-9

    @pytest.mark.parametrize("c", [0.0, 0.7, 1.9, 3.9])
    def test_scaled_polynomial(self, c):
        n = 4
        assert P.T_n_scaled(c, n) == pytest.approx(float(mp_T(c, n) / (n + 1) ** n), abs=1e-13)
        assert P.T_n(c, n) == pytest.approx(float(mp_T(c, n)), rel=1e-12)

    def test_large_n_no_overflow(self):
        res = P.threshold_c_star(10_000, cross_check=False)
        assert math.isfinite(res.c_star)
        assert res.c_star > math.log(10_000) / 3

    def test_definitions_agree(self):
        for n in range(2, 51):
            c = P.threshold_c_star(n).c_star
            p = P.bundle_price(D.uniform_shift(c), n).price
            assert abs((n + 1) * (c + 1 - p) - (c + 1)) <= 1e-8

    def test_table_properties(self):
        rows = P.threshold_table(50, workers=1)
        cs = np.array([r.c_star for r in rows])
        assert [r.n for r in rows] == list(range(2, 51))
        assert np.all(np.diff(cs) > 0)
        assert np.all(cs > np.log(np.arange(2, 51)) / 3)

    def test_table_parallel_matches_serial(self):
        a = [r.c_star for r in P.threshold_table(12, workers=1)]
        b = [r.c_star for r in P.threshold_table(12, workers=3)]
        assert a == b


class TestOptimality:
    @pytest.mark.parametrize("c,n,expected", [(0.5, 2, True), (1.0, 2, True), (1.5, 2, False),
                                              (1.3, 3, True), (1.32, 3, False), (0.0, 9, True)])
    def test_examples(self, c, n, expected):
        v = P.uniform_pricing_optimal(c, n)
        assert v.uniform_pricing_optimal is expected
        assert v.rules["polynomial_sign"] == v.rules["threshold_compare"]

    def test_beyond_n(self):
        assert not P.uniform_pricing_optimal(3.5, 3).uniform_pricing_optimal
