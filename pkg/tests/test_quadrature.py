import math

import numpy as np
import pytest

from unitdemand import quadrature as Q
from unitdemand.errors import DomainError, NumericalError


class TestGaussLegendre:
    @pytest.mark.parametrize("order", [1, 4, 16])
    def test_exact_for_low_degree(self, order):
        x, w = Q.gauss_legendre(order)
        for k in range(2 * order):
            assert np.dot(w, x**k) == pytest.approx(1.0 / (k + 1), rel=1e-13)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            Q.gauss_legendre(0)

    def test_panels_respect_breaks(self):
        edges = Q.panel_edges(0.0, 1.0, [0.3, -1.0, 0.3, 2.0])
        np.testing.assert_array_equal(edges, [0.0, 0.3, 1.0])

    def test_kink_integrated_exactly(self):
        nodes, weights = Q.panel_nodes(0.0, 1.0, [1 / 3], order=2)
        assert np.dot(weights, np.abs(nodes - 1 / 3)) == pytest.approx(5 / 18, abs=1e-15)


class TestBoxAndCube:
    def test_box_polynomial(self):
        val = Q.box_integral(lambda z: z[:, 0] ** 2 * z[:, 1], [0, 1], [1, 3], order=4)
        assert val == pytest.approx(4 / 3, rel=1e-14)

    def test_empty_box(self):
        assert Q.box_integral(lambda z: np.ones(len(z)), [1.0], [1.0]) == 0.0

    def test_nonfinite_integrand(self):
        with pytest.raises(NumericalError):
            Q.box_integral(lambda z: np.full(len(z), np.inf), [0], [1], order=2)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_expected_max(self, d):
        val = Q.anchored_cube_integral(lambda z: z.max(axis=1), 0.0, 1.0, d, order=8)
        assert val == pytest.approx(d / (d + 1), rel=1e-13)

    @pytest.mark.parametrize("d", [2, 3])
    def test_expected_min_with_kink(self, d):
        # E[max(min(x) - 0.4, 0)] on the unit cube = int_0.4^1 (1-t)^d dt
        val = Q.anchored_cube_integral(lambda z: np.maximum(z.min(axis=1) - 0.4, 0), 0.0, 1.0, d, "min",
                                       breaks=[0.4], order=8)
        assert val == pytest.approx(0.6 ** (d + 1) / (d + 1), rel=1e-12)

    def test_bad_anchor(self):
        with pytest.raises(DomainError):
            Q.anchored_cube_integral(lambda z: z[:, 0], 0, 1, 2, anchor="mid")


class TestSimplex:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_volume(self, d):
        assert Q.simplex_integral(lambda w: np.ones(len(w)), d, 0.7, order=4) == pytest.approx(0.7**d / math.factorial(d))

    def test_linear_moment(self):
        # int over the 2-simplex of side a of w_1 = a**3 / 6
        assert Q.simplex_integral(lambda w: w[:, 0], 2, 0.5, order=4) == pytest.approx(0.5**3 / 6, rel=1e-14)

    def test_degenerate(self):
        assert Q.simplex_integral(lambda w: np.ones(len(w)), 2, 0.0) == 0.0
