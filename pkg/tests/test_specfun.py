"""Accuracy and property tests for the log-gamma / polygamma implementations.

Frozen expected values were computed with mpmath at 30 significant digits.
Grid comparisons use scipy.special as an independent reference.
"""

import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from iedl.specfun import digamma, log_gamma, tetragamma, trigamma

EULER_GAMMA = 0.5772156649015328606


class TestFrozenValues:
    def test_log_gamma_known_points(self):
        np.testing.assert_allclose(log_gamma(0.5), 0.572364942924700087, rtol=1e-13)
        np.testing.assert_allclose(log_gamma(5.0), 3.17805383034794562, rtol=1e-13)
        np.testing.assert_allclose(log_gamma(10.0), math.log(362880.0), rtol=1e-13)

    def test_log_gamma_exact_zeros(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(2.0) == 0.0

    def test_digamma_known_points(self):
        np.testing.assert_allclose(digamma(1.0), -EULER_GAMMA, atol=1e-12)
        np.testing.assert_allclose(digamma(0.5), -1.96351002602142348, atol=1e-12)
        np.testing.assert_allclose(digamma(2.0), 1.0 - EULER_GAMMA, atol=1e-12)

    def test_trigamma_known_points(self):
        np.testing.assert_allclose(trigamma(1.0), math.pi**2 / 6.0, atol=1e-12)
        np.testing.assert_allclose(trigamma(0.5), math.pi**2 / 2.0, atol=1e-11)
        np.testing.assert_allclose(trigamma(10.0), 0.105166335681685746, atol=1e-13)
        np.testing.assert_allclose(trigamma(2.0), math.pi**2 / 6.0 - 1.0, atol=1e-12)

    def test_tetragamma_known_points(self):
        np.testing.assert_allclose(tetragamma(1.0), -2.40411380631918857, atol=1e-11)
        np.testing.assert_allclose(tetragamma(5.0), -0.0487897322451145, atol=1e-12)
        np.testing.assert_allclose(tetragamma(2.0), 2.0 - 2.40411380631918857, atol=1e-11)


class TestReferenceGrid:
    """Agreement with scipy over [1e-3, 1e6].

    Where the functions blow up (x -> 0) an absolute tolerance is
    meaningless, so each check combines the target absolute tolerance with
    a small relative one.
    """

    grid = np.logspace(-3, 6, 400)

    def test_log_gamma_grid(self):
        np.testing.assert_allclose(
            log_gamma(self.grid), sp.gammaln(self.grid), rtol=1e-12, atol=5e-13
        )

    def test_digamma_grid(self):
        np.testing.assert_allclose(
            digamma(self.grid), sp.digamma(self.grid), rtol=1e-12, atol=1e-10
        )

    def test_trigamma_grid(self):
        np.testing.assert_allclose(
            trigamma(self.grid), sp.polygamma(1, self.grid), rtol=1e-12, atol=1e-10
        )

    def test_tetragamma_grid(self):
        np.testing.assert_allclose(
            tetragamma(self.grid), sp.polygamma(2, self.grid), rtol=1e-11, atol=1e-8
        )


class TestRecurrences:
    """Each function must satisfy its own shift identity."""

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_digamma_recurrence(self, x):
        assert abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) <= 1e-10 * max(
            1.0, 1.0 / x
        )

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_trigamma_recurrence(self, x):
        lhs = trigamma(x + 1.0)
        rhs = trigamma(x) - 1.0 / (x * x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, 1.0 / (x * x))

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_tetragamma_recurrence(self, x):
        lhs = tetragamma(x + 1.0)
        rhs = tetragamma(x) + 2.0 / (x * x * x)
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, 2.0 / x**3)

    @given(st.floats(min_value=1e-3, max_value=1e5))
    @settings(max_examples=200, deadline=None)
    def test_log_gamma_recurrence(self, x):
        lhs = log_gamma(x + 1.0)
        rhs = log_gamma(x) + math.log(x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


class TestDerivativeConsistency:
    """Central differences of each function match the next one up."""

    points = np.array([0.05, 0.3, 0.9, 1.5, 3.7, 8.2, 25.0, 140.0])

    def test_digamma_is_dlgamma(self):
        h = 1e-6 * np.maximum(1.0, self.points)
        fd = (log_gamma(self.points + h) - log_gamma(self.points - h)) / (2 * h)
        np.testing.assert_allclose(fd, digamma(self.points), rtol=1e-6)

    def test_trigamma_is_ddigamma(self):
        h = 1e-6 * np.maximum(1.0, self.points)
        fd = (digamma(self.points + h) - digamma(self.points - h)) / (2 * h)
        np.testing.assert_allclose(fd, trigamma(self.points), rtol=1e-6)

    def test_tetragamma_is_dtrigamma(self):
        h = 1e-6 * np.maximum(1.0, self.points)
        fd = (trigamma(self.points + h) - trigamma(self.points - h)) / (2 * h)
        np.testing.assert_allclose(fd, tetragamma(self.points), rtol=1e-6)


class TestSignsAndShapes:
    def test_trigamma_positive_tetragamma_negative(self):
        grid = np.logspace(-3, 5, 200)
        assert np.all(trigamma(grid) > 0.0)
        assert np.all(tetragamma(grid) < 0.0)

    def test_scalar_in_scalar_out(self):
        assert isinstance(log_gamma(3.5), float)
        assert isinstance(digamma(3.5), float)
        assert isinstance(trigamma(3.5), float)
        assert isinstance(tetragamma(3.5), float)

    def test_array_shape_preserved(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        for fn in (log_gamma, digamma, trigamma, tetragamma):
            assert fn(x).shape == (2, 2)

    @pytest.mark.parametrize("fn", [log_gamma, digamma, trigamma, tetragamma])
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
    def test_domain_errors(self, fn, bad):
        with pytest.raises(ValueError):
            fn(bad)
