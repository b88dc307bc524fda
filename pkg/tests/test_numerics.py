"""Tests for numerics.py"""

import math

import mpmath
import numpy as np
import pytest

from errors import InvalidInputError, NumericFailureError
from numerics import adaptive_simpson, complement_of_power, digamma


class TestDigamma:
    """Tests for digamma function."""

    def test_euler_mascheroni(self):
        """Test psi(1) = -gamma."""
        assert digamma(1.0) == pytest.approx(-0.5772156649015329, abs=1e-10)

    def test_half(self):
        """Test psi(1/2) = -gamma - 2 ln 2."""
        assert digamma(0.5) == pytest.approx(-1.9635100260214235, abs=1e-10)

    @pytest.mark.parametrize("x", [0.5, 1.0, 3.7, 12.0])
    def test_recurrence_points(self, x):
        """Test psi(x + 1) - psi(x) = 1/x at a few points."""
        assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, abs=1e-10)

    def test_recurrence_log_grid(self):
        """Test the recurrence on 100 log-spaced points."""
        for x in np.logspace(-2, 3, 100):
            assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, abs=1e-10)

    def test_against_high_precision(self):
        """Test against 50-digit values across small and large arguments."""
        with mpmath.workdps(50):
            for x in (0.01, 0.3, 2.5, 5.999, 6.0, 17.25, 130.0, 4096.5):
                assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), abs=1e-10)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5, math.inf, math.nan])
    def test_domain(self, x):
        """Test that non-positive and non-finite arguments are rejected."""
        with pytest.raises(InvalidInputError):
            digamma(x)


class TestComplementOfPower:
    """Tests for complement_of_power function."""

    def test_trivial_cases(self):
        """Test p = 0, p = 1 and a zero exponent."""
        assert complement_of_power(0.0, 5) == 0.0
        assert complement_of_power(1.0, 5) == 1.0
        assert complement_of_power(0.3, 0) == 0.0

    def test_matches_direct_formula(self):
        """Test a moderate case where direct evaluation is accurate."""
        assert complement_of_power(0.25, 3) == pytest.approx(1 - 0.75**3, rel=1e-15)

    @pytest.mark.parametrize("p, exponent", [(1e-12, 1), (3e-11, 5), (1e-9, 2), (2e-10, 40), (1e-6, 10), (0.4, 15)])
    def test_high_precision(self, p, exponent):
        """Test against 50-digit values, including the small-product branch."""
        with mpmath.workdps(50):
            expected = 1 - (1 - mpmath.mpf(p)) ** exponent
        assert complement_of_power(p, exponent) == pytest.approx(float(expected), rel=1e-12)

    def test_invalid_probability(self):
        """Test that probabilities outside [0, 1] are rejected."""
        with pytest.raises(InvalidInputError):
            complement_of_power(1.5, 2)
        with pytest.raises(InvalidInputError):
            complement_of_power(-0.1, 2)


class TestAdaptiveSimpson:
    """Tests for adaptive_simpson function."""

    def test_polynomial(self):
        """Test that Simpson integrates a quadratic exactly."""
        assert adaptive_simpson(lambda x: x * x, 0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_sine(self):
        """Test the integral of sin over [0, pi]."""
        assert adaptive_simpson(math.sin, 0.0, math.pi, rel_tol=1e-10) == pytest.approx(2.0, rel=1e-9)

    def test_against_mpmath_quad(self):
        """Test a peaked integrand against mpmath.quad."""
        f = lambda x: math.exp(-((x * (40.0 - x)) ** 2) / 90000.0)  # noqa: E731
        expected = float(mpmath.quad(lambda x: mpmath.exp(-((x * (40 - x)) ** 2) / 90000), [1, 10, 20]))
        assert adaptive_simpson(f, 1.0, 20.0, rel_tol=1e-10) == pytest.approx(expected, rel=1e-8)

    def test_reversed_bounds(self):
        """Test that swapping the bounds flips the sign."""
        assert adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1.0), rel=1e-8)

    def test_empty_interval(self):
        """Test that an empty interval integrates to zero."""
        assert adaptive_simpson(math.exp, 2.0, 2.0) == 0.0

    def test_non_finite_integrand(self):
        """Test that an infinite integrand value is reported."""
        with pytest.raises(NumericFailureError):
            adaptive_simpson(lambda x: math.inf if x == 0.0 else 1.0, 0.0, 1.0)

    def test_refinement_cap(self):
        """Test that an integrand needing deeper refinement than allowed is reported."""
        with pytest.raises(NumericFailureError, match="did not converge"):
            adaptive_simpson(lambda x: math.sin(50.0 * x), 0.0, 10.0, rel_tol=1e-12, max_depth=2)
