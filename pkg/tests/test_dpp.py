"""
Unit tests for the DPP operators and value iteration.
"""
import numpy as np
import pytest

from dpp.engine import (
    OperatorKind,
    apply_operator,
    epsilon_study,
    oscillation,
    residual,
    solve,
    value_iterate,
)
from lattice.domain import build_grid
from lattice.fields import ScalarField, constant_field, sample_field
from models.exceptions import ConfigurationError, ContractViolation
from oracles.closed_form import gradient_constraint_1d
from tests.conftest import interval, make_problem, square

KINDS = list(OperatorKind)


@pytest.fixture
def square_grid():
    return build_grid(make_problem(square(), 0.1, 0.2, {'kind': 'constant', 'value': 0.0}))


class TestOperators:
    """Test suite for apply_operator, residual and oscillation."""

    def test_linear_fixed_point(self, unit_interval_grid):
        """u(x) = x is a PayOrLeave fixed point when eps = h."""
        field = ScalarField(unit_interval_grid, unit_interval_grid.coords[:, 0])
        assert residual(unit_interval_grid, field, OperatorKind.PAY_OR_LEAVE) == 0.0
        out = apply_operator(unit_interval_grid, field, 'pay_or_leave')
        np.testing.assert_allclose(out.values, field.values)

    def test_zero_residual(self, unit_interval_grid):
        field = constant_field(unit_interval_grid, 0.0)
        for kind in KINDS:
            assert residual(unit_interval_grid, field, kind) == 0.0

    @pytest.mark.parametrize('kind', KINDS)
    def test_monotone(self, square_grid, kind):
        """u <= v pointwise implies T[u] <= T[v]."""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            u = rng.normal(size=square_grid.node_count)
            v = u + rng.exponential(size=square_grid.node_count) * (rng.random(square_grid.node_count) < 0.5)
            tu = apply_operator(square_grid, ScalarField(square_grid, u), kind)
            tv = apply_operator(square_grid, ScalarField(square_grid, v), kind)
            assert np.all(tu.values <= tv.values)

    def test_pay_or_leave_single_sweep(self, unit_interval_grid):
        """F(0) = 0, F(1) = 1, u = 1 inside: one sweep gives (0.5, 0.75, 0.75)."""
        values = np.where(unit_interval_grid.coords[:, 0] == 0.0, 0.0, 1.0)
        field = ScalarField(unit_interval_grid, values)
        out = apply_operator(unit_interval_grid, field, OperatorKind.PAY_OR_LEAVE)
        np.testing.assert_array_equal(out.interior_values, [0.5, 0.75, 0.75])
        np.testing.assert_array_equal(out.strip_values, [0.0, 1.0])
        assert residual(unit_interval_grid, field, OperatorKind.PAY_OR_LEAVE) == 0.5

    def test_infinity_harmonic_commutes_with_constants(self, square_grid):
        """T[u + c] = T[u] + c, exactly on dyadic data."""
        rng = np.random.default_rng(3)
        for c in (0.75, -2.5, 16.0):
            u = rng.integers(-64, 64, size=square_grid.node_count) / 8.0
            shifted = apply_operator(square_grid, ScalarField(square_grid, u + c), OperatorKind.INFINITY_HARMONIC)
            plain = apply_operator(square_grid, ScalarField(square_grid, u), OperatorKind.INFINITY_HARMONIC)
            np.testing.assert_array_equal(shifted.values, plain.values + c)

        u = rng.normal(size=square_grid.node_count)
        shifted = apply_operator(square_grid, ScalarField(square_grid, u + 0.1), OperatorKind.INFINITY_HARMONIC)
        plain = apply_operator(square_grid, ScalarField(square_grid, u), OperatorKind.INFINITY_HARMONIC)
        np.testing.assert_allclose(shifted.values, plain.values + 0.1, rtol=0, atol=1e-14)

    def test_input_not_modified(self, square_grid):
        field = ScalarField(square_grid, np.random.default_rng(0).normal(size=square_grid.node_count))
        before = field.values.copy()
        out = apply_operator(square_grid, field, OperatorKind.INFINITY_HARMONIC)
        np.testing.assert_array_equal(field.values, before)
        np.testing.assert_array_equal(out.strip_values, field.strip_values)

    def test_mask_freezes_other_nodes(self, square_grid):
        field = ScalarField(square_grid, np.random.default_rng(1).normal(size=square_grid.node_count))
        mask = np.zeros(square_grid.node_count, dtype=bool)
        mask[square_grid.interior_nodes[:5]] = True
        out = apply_operator(square_grid, field, OperatorKind.INFINITY_HARMONIC, mask=mask)
        np.testing.assert_array_equal(out.values[~mask], field.values[~mask])

    def test_mask_with_strip_node(self, square_grid):
        mask = np.zeros(square_grid.node_count, dtype=bool)
        mask[square_grid.strip_nodes[0]] = True
        with pytest.raises(ContractViolation, match='interior'):
            apply_operator(square_grid, constant_field(square_grid, 0.0), 'infinity_harmonic', mask=mask)

    def test_unknown_operator(self, unit_interval_grid):
        with pytest.raises(ConfigurationError) as excinfo:
            apply_operator(unit_interval_grid, constant_field(unit_interval_grid, 0.0), 'heat')
        assert excinfo.value.key == 'operator'

    def test_oscillation_affine(self):
        """u(x) = x gives A = 2 eps on every interior node."""
        grid = build_grid(make_problem(interval(0.0, 1.0), 0.1, 0.3, {'kind': 'constant', 'value': 0.0}))
        field = ScalarField(grid, grid.coords[:, 0])
        amplitude = oscillation(grid, field)
        np.testing.assert_allclose(amplitude.interior_values, 0.6)
        np.testing.assert_array_equal(amplitude.strip_values, 0.0)

    def test_oscillation_constant(self, square_grid):
        assert np.all(oscillation(square_grid, constant_field(square_grid, 3.0)).values == 0.0)


class TestValueIterate:
    """Test suite for value_iterate and solve."""

    def test_affine_data(self):
        """F(0)=0, F(1)=1 at h = eps = 0.25 converges to u(x) = x."""
        spec = make_problem(interval(0.0, 1.0), 0.25, 0.25, {'kind': 'affine', 'slope': [1.0]})
        u, report = solve(spec)
        assert report.converged
        assert report.monotone
        np.testing.assert_allclose(u.interior_values, [0.25, 0.5, 0.75], atol=1e-8)

    def test_constant_infinity_harmonic(self, square_grid):
        boundary = constant_field(square_grid, 0.7)
        u, report = value_iterate(square_grid, boundary, OperatorKind.INFINITY_HARMONIC)
        np.testing.assert_allclose(u.values, 0.7, rtol=0, atol=1e-15)
        assert report.final_residual <= 1e-15

    def test_gradient_problem_against_closed_form(self, gradient_solution):
        grid, _, u, report = gradient_solution
        assert report.converged
        assert report.monotone
        exact = np.array([gradient_constraint_1d(x, extend=True) for x in grid.coords[:, 0]])
        assert np.max(np.abs(u.interior_values - exact[grid.interior_nodes])) <= 0.05

    def test_gradient_problem_bounds(self, gradient_solution):
        _, boundary, u, _ = gradient_solution
        strip = boundary.strip_values
        assert np.all(u.values >= min(0.0, strip.min()) - 1e-12)
        assert np.all(u.values <= strip.max() + 1e-12)

    def test_oscillation_bound(self, gradient_solution):
        """max A <= 4 max(Lip F, 1) eps with Lip F = 1."""
        grid, _, u, _ = gradient_solution
        assert oscillation(grid, u).values.max() <= 4.0 * grid.epsilon

    def test_comparison_principle(self):
        """Ordered boundary data give ordered solutions."""
        grid = build_grid(make_problem(square(), 0.25, 0.25, {'kind': 'constant', 'value': 0.0}))
        rng = np.random.default_rng(5)
        for _ in range(100):
            f1 = rng.uniform(-1.0, 1.0, grid.node_count)
            f2 = f1 + rng.exponential(0.3, grid.node_count) * (rng.random(grid.node_count) < 0.5)
            u1, r1 = value_iterate(grid, ScalarField(grid, f1), OperatorKind.PAY_OR_LEAVE, tol=1e-14)
            u2, r2 = value_iterate(grid, ScalarField(grid, f2), OperatorKind.PAY_OR_LEAVE, tol=1e-14)
            assert r1.converged and r2.converged
            assert np.max(u1.values - u2.values) <= 1e-12

    @pytest.mark.parametrize('kind', KINDS)
    @pytest.mark.parametrize('transform', ['reflect', 'rotate'])
    def test_lattice_symmetry(self, kind, transform):
        """Solving with reflected or rotated data gives the reflected or rotated solution."""
        grid = build_grid(make_problem(square(), 0.125, 0.25, {'kind': 'constant', 'value': 0.0}))
        i, j = grid.lattice[:, 0], grid.lattice[:, 1]
        moved = np.stack([8 - i, j] if transform == 'reflect' else [j, 8 - i], axis=1)
        perm = grid.locate(moved)
        assert np.all(perm >= 0)

        data = np.random.default_rng(9).uniform(-1.0, 1.0, grid.node_count)
        u, _ = value_iterate(grid, ScalarField(grid, data), kind, tol=1e-12, max_iter=5000)
        image, _ = value_iterate(grid, ScalarField(grid, data[perm]), kind, tol=1e-12, max_iter=5000)
        np.testing.assert_array_equal(image.values, u.values[perm])

    def test_gauss_seidel_matches_jacobi(self):
        spec = make_problem(square(), 0.125, 0.25, {'kind': 'affine', 'slope': [0.3, -0.2]})
        grid = build_grid(spec)
        boundary = sample_field(grid, spec.boundary)
        jacobi, _ = value_iterate(grid, boundary, OperatorKind.PAY_OR_LEAVE, tol=1e-12, sweep='jacobi')
        seidel, report = value_iterate(grid, boundary, OperatorKind.PAY_OR_LEAVE, tol=1e-12, sweep='gauss_seidel')
        assert report.converged
        assert jacobi.sup_distance(seidel) <= 1e-8

    def test_budget_exhausted(self, square_grid):
        """Running out of sweeps returns an unconverged field, not an error."""
        boundary = ScalarField(square_grid, square_grid.coords[:, 0])
        u, report = value_iterate(square_grid, boundary, OperatorKind.INFINITY_HARMONIC, max_iter=2)
        assert not report.converged
        assert report.iterations == 2
        assert report.final_residual > 0

    def test_empty_mask(self, square_grid):
        boundary = ScalarField(square_grid, square_grid.coords[:, 1])
        u, report = value_iterate(square_grid, boundary, OperatorKind.PAY_OR_LEAVE,
                                  mask=np.zeros(square_grid.node_count, dtype=bool))
        assert report.converged
        np.testing.assert_array_equal(u.values, boundary.values)

    def test_bad_sweep(self, square_grid):
        with pytest.raises(ConfigurationError, match='sweep'):
            value_iterate(square_grid, constant_field(square_grid, 0.0), 'pay_or_leave', sweep='red_black')

    def test_foreign_boundary(self, square_grid, unit_interval_grid):
        with pytest.raises(ContractViolation):
            value_iterate(square_grid, constant_field(unit_interval_grid, 0.0), 'pay_or_leave')


class TestEpsilonStudy:
    """Test suite for epsilon_study."""

    def test_errors_decrease(self, gradient_problem):
        study = epsilon_study(gradient_problem, [0.2, 0.1, 0.05], reference=gradient_problem.boundary)
        errors = study.reference_errors
        assert errors[0] > errors[1] > errors[2]
        assert np.allclose(np.diag(study.distances), 0.0)
        assert study.h == pytest.approx([0.05, 0.025, 0.0125])

    def test_zero_data(self):
        spec = make_problem(interval(0.0, 1.0), 0.05, 0.1, {'kind': 'constant', 'value': 0.0})
        study = epsilon_study(spec, [0.2, 0.1])
        assert np.all(np.array(study.distances) == 0.0)
        assert study.reference_errors is None

    def test_incompatible_lattices(self, gradient_problem):
        with pytest.raises(ConfigurationError) as excinfo:
            epsilon_study(gradient_problem, [0.2, 0.15])
        assert excinfo.value.key == 'eps_list'

    def test_empty_list(self, gradient_problem):
        with pytest.raises(ConfigurationError, match='empty'):
            epsilon_study(gradient_problem, [])

