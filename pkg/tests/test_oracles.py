"""
Unit tests for the closed-form reference solutions.
"""
import numpy as np
import pytest

from models.exceptions import ContractViolation, NoDeadCoreError
from oracles.closed_form import (
    RadialSpec,
    circle_intersection_fraction,
    dead_core_profile,
    gradient_constraint_1d,
    limit_radial_profile,
    theta_constant,
)


class TestDeadCoreProfile:
    """Test suite for the radial dead-core solution."""

    def test_theta_constant(self):
        assert theta_constant(1, 2.0, 2.0) == pytest.approx(1.0)
        assert theta_constant(2, 2.0, 3.0) == pytest.approx((2.0 / 3.0) * 1.0)

    def test_theta_rejects_small_p(self):
        with pytest.raises(ValueError, match='p must be'):
            theta_constant(1, 1.0, 1.5)

    def test_profile_value(self):
        """N=1, R=2, kappa=1, lambda0=2, p=2: Theta=1, r0=1."""
        spec = RadialSpec(N=1, R=2.0, kappa=1.0, lambda0=2.0, p=2.0)
        assert spec.r0 == pytest.approx(1.0)
        assert dead_core_profile(spec, 1.5) == pytest.approx(0.25)
        assert dead_core_profile(spec, -1.5) == pytest.approx(0.25)
        assert dead_core_profile(spec, 0.5) == 0.0
        assert dead_core_profile(spec, 2.0) == pytest.approx(1.0)

    def test_profile_on_points(self):
        """2D input is a stack of points."""
        spec = RadialSpec(N=2, R=2.0, kappa=1.0, lambda0=4.0, p=2.0)
        values = dead_core_profile(spec, np.array([[0.0, 0.0], [1.5, 0.0], [0.0, 1.5]]))
        assert values.shape == (3,)
        assert values[0] == 0.0
        assert values[1] == pytest.approx(values[2])

    def test_no_dead_core(self):
        """kappa too large for the radius."""
        spec = RadialSpec(N=1, R=1.0, kappa=1.0, lambda0=2.0, p=2.0)
        with pytest.raises(NoDeadCoreError, match='no dead core'):
            dead_core_profile(spec, 0.5)

    def test_ode_residual(self):
        """-(|v'|^(p-2) v')' = -lambda0 on the positivity set, N=1."""
        spec = RadialSpec(N=1, R=2.0, kappa=0.5, lambda0=2.0, p=3.0)
        h = 1e-3
        x = np.arange(spec.r0 + 0.05, spec.R - 0.05, h)
        v = dead_core_profile(spec, x)
        slope = np.diff(v) / h
        flux = np.abs(slope) ** (spec.p - 2) * slope
        np.testing.assert_allclose(np.diff(flux) / h, spec.lambda0, atol=1e-3)

    def test_pointwise_limit(self):
        """Large p approaches the limit profile."""
        x = np.linspace(-1.9, 1.9, 77)
        spec = RadialSpec(N=1, R=2.0, kappa=0.5, lambda0=1.0, p=1000.0)
        diff = np.abs(dead_core_profile(spec, x) - limit_radial_profile(2.0, 0.5, x))
        assert diff.max() <= 1e-2


class TestLimitProfile:
    """Test suite for the p -> infinity radial profile."""

    def test_values(self):
        assert limit_radial_profile(2.0, 0.5, 1.8) == pytest.approx(0.3)
        assert limit_radial_profile(2.0, 0.5, 1.2) == 0.0
        assert limit_radial_profile(2.0, 1.0, np.array([[1.5, 0.0]]))[0] == pytest.approx(0.5)

    def test_center(self):
        assert limit_radial_profile(2.0, 1.0, 4.5, center=[3.0]) == pytest.approx(0.5)


class TestGradientConstraint:
    """Test suite for the closed form on (-1, 4)."""

    @pytest.mark.parametrize('x, expected', [(-1.0, 1.0), (-0.5, 0.5), (0.0, 0.0), (2.0, -0.5), (4.0, -1.0)])
    def test_values(self, x, expected):
        assert gradient_constraint_1d(x) == pytest.approx(expected)

    def test_outside_interval(self):
        with pytest.raises(ContractViolation, match='outside'):
            gradient_constraint_1d(4.5)

    def test_extension(self):
        assert gradient_constraint_1d(4.5, extend=True) == pytest.approx(-1.125)
        assert gradient_constraint_1d(-1.25, extend=True) == pytest.approx(1.25)


class TestCircleIntersection:
    """Test suite for the disk fraction outside a ball."""

    def test_equal_circles(self):
        expected = 1.0 - (2.0 * np.pi / 3.0 - np.sqrt(3.0) / 2.0) / np.pi
        assert circle_intersection_fraction(1.0, 1.0, 1.0) == pytest.approx(expected)
        assert expected == pytest.approx(0.609, abs=1e-3)

    def test_disjoint_and_contained(self):
        assert circle_intersection_fraction(5.0, 1.0, 2.0) == pytest.approx(1.0)
        assert circle_intersection_fraction(0.5, 0.5, 2.0) == pytest.approx(0.0)

    def test_half_at_boundary_for_small_rho(self):
        """A tiny disk centered on a large circle is about half outside."""
        assert circle_intersection_fraction(10.0, 0.01, 10.0) == pytest.approx(0.5, abs=1e-3)

    def test_vectorized(self):
        values = circle_intersection_fraction(np.array([0.0, 1.0, 3.0]), 0.5, 2.0)
        np.testing.assert_allclose(values, [0.0, 0.0, 1.0], atol=1e-12)
