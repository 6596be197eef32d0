"""
Unit tests for the lattice, scalar fields and field I/O.
"""
import numpy as np
import pytest

from lattice.domain import ball_neighbors, build_grid, steps_per_epsilon
from lattice.field_io import export, read_field_csv, write_field_csv, write_pgm
from lattice.fields import ScalarField, constant_field, sample_field, sample_lambda
from models.exceptions import ConfigurationError, ContractViolation, DomainTooSmallError, IngestionError, UsageError
from models.schema import AffineDatum, ConstantDatum, RadialDatum, TableDatum
from tests.conftest import interval, make_problem, square

ZERO = {'kind': 'constant', 'value': 0.0}


class TestBuildGrid:
    """Test suite for build_grid."""

    def test_interval_nodes(self, unit_interval_grid):
        """Interior nodes lie strictly inside, strip nodes within eps outside."""
        grid = unit_interval_grid
        np.testing.assert_allclose(grid.coords[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(grid.coords[grid.interior_nodes, 0], [0.25, 0.5, 0.75])
        np.testing.assert_allclose(grid.coords[grid.strip_nodes, 0], [0.0, 1.0])
        assert grid.k == 1

    def test_square_node_counts(self):
        """(0,1)^2 at h = eps = 0.25 has a 3x3 interior and a 16-node strip."""
        grid = build_grid(make_problem(square(), 0.25, 0.25, ZERO))
        assert len(grid.interior_nodes) == 9
        assert len(grid.strip_nodes) == 16
        assert grid.neighbor_table.shape == (9, 5)

    def test_lexicographic_order(self):
        """Nodes are sorted by lattice coordinates."""
        grid = build_grid(make_problem(square(), 0.125, 0.25, ZERO))
        keys = [tuple(row) for row in grid.lattice]
        assert keys == sorted(keys)

    def test_epsilon_not_multiple_of_h(self):
        """A non-integer eps/h is a configuration error naming epsilon."""
        with pytest.raises(ConfigurationError, match='epsilon'):
            build_grid(make_problem(interval(0.0, 1.0), 0.1, 0.25, ZERO))

    def test_steps_per_epsilon(self):
        """Floating-point multiples are accepted."""
        assert steps_per_epsilon(0.0125, 0.05) == 4
        assert steps_per_epsilon(0.1, 0.3) == 3

    def test_empty_interior(self):
        """No lattice point strictly inside the domain."""
        with pytest.raises(DomainTooSmallError):
            build_grid(make_problem(interval(0.0, 0.1), 0.25, 0.25, ZERO))

    def test_neighbor_lists_contain_self_and_are_symmetric(self):
        """y in N(x) iff x in N(y) for interior x, y; x in N(x)."""
        grid = build_grid(make_problem(square(), 0.1, 0.2, ZERO))
        members = {int(node): set(row.tolist())
                   for node, row in zip(grid.interior_nodes, grid.neighbor_table)}
        for node, row in members.items():
            assert node in row
            for other in row:
                if other in members:
                    assert node in members[other]

    def test_neighbors_are_nodes_within_epsilon(self):
        """Every neighbor lies in the closed eps-ball and rows are sorted."""
        grid = build_grid(make_problem(square(), 0.1, 0.3, ZERO))
        for node, row in zip(grid.interior_nodes, grid.neighbor_table):
            distances = np.linalg.norm(grid.coords[row] - grid.coords[node], axis=1)
            assert np.all(distances <= grid.epsilon + 1e-12)
            assert list(row) == sorted(row)

    def test_ball_neighbors_rejects_strip_node(self, unit_interval_grid):
        """Strip nodes have no neighbor list."""
        grid = unit_interval_grid
        assert ball_neighbors(grid, 2) == [1, 2, 3]
        with pytest.raises(ContractViolation):
            ball_neighbors(grid, int(grid.strip_nodes[0]))

    def test_ball_domain(self):
        """A 2D ball has a symmetric node set."""
        grid = build_grid(make_problem({'kind': 'ball', 'center': [0.0, 0.0], 'radius': 1.0}, 0.25, 0.25, ZERO))
        assert grid.dim == 2
        assert np.all(np.linalg.norm(grid.coords[grid.interior_nodes], axis=1) < 1.0)
        np.testing.assert_allclose(grid.coords.sum(axis=0), [0.0, 0.0], atol=1e-12)


class TestScalarField:
    """Test suite for ScalarField and datum sampling."""

    def test_rejects_non_finite(self, unit_interval_grid):
        with pytest.raises(ContractViolation, match='finite'):
            ScalarField(unit_interval_grid, [0.0, np.nan, 0.0, 0.0, 0.0])

    def test_rejects_wrong_length(self, unit_interval_grid):
        with pytest.raises(ContractViolation, match='shape'):
            ScalarField(unit_interval_grid, np.zeros(3))

    def test_values_are_copied_and_read_only(self, unit_interval_grid):
        source = np.zeros(5)
        field = ScalarField(unit_interval_grid, source)
        source[0] = 1.0
        assert field.values[0] == 0.0
        with pytest.raises(ValueError):
            field.values[0] = 2.0

    def test_affine_datum(self, unit_interval_grid):
        field = sample_field(unit_interval_grid, AffineDatum(slope=[2.0], offset=-1.0))
        np.testing.assert_allclose(field.values, 2.0 * unit_interval_grid.coords[:, 0] - 1.0)

    def test_radial_datum(self, unit_interval_grid):
        field = sample_field(unit_interval_grid, RadialDatum(kappa=3.0))
        np.testing.assert_allclose(field.strip_values, 3.0)
        np.testing.assert_allclose(field.interior_values, 0.0)

    def test_table_datum_missing_strip_node(self, unit_interval_grid):
        """A table has to cover every strip node."""
        with pytest.raises(IngestionError, match='misses 1 node'):
            sample_field(unit_interval_grid, TableDatum(rows=[[0.0, 1.0]]))

    def test_table_datum(self, unit_interval_grid):
        field = sample_field(unit_interval_grid, TableDatum(rows=[[0.0, 1.0], [1.0, 2.0]], interior=0.5))
        np.testing.assert_allclose(field.values, [1.0, 0.5, 0.5, 0.5, 2.0])

    def test_oracle_datum_extends_onto_strip(self, gradient_solution):
        grid, boundary, _, _ = gradient_solution
        left = boundary.values[np.argmin(grid.coords[:, 0])]
        assert left == pytest.approx(-grid.coords[:, 0].min())

    def test_lambda_must_be_positive(self, unit_interval_grid):
        with pytest.raises(ConfigurationError, match='lambda0'):
            sample_lambda(unit_interval_grid, ConstantDatum(value=-1.0))
        np.testing.assert_allclose(sample_lambda(unit_interval_grid, 2.0), [2.0, 2.0, 2.0])

    def test_sup_distance(self, unit_interval_grid):
        a = constant_field(unit_interval_grid, 0.0)
        b = a.with_values([5.0, 0.1, -0.3, 0.2, 5.0])
        assert a.sup_distance(b) == pytest.approx(0.3)
        assert a.sup_distance(b, interior_only=False) == pytest.approx(5.0)


class TestFieldIO:
    """Test suite for CSV and PGM export."""

    def test_csv_round_trip(self, tmp_path):
        grid = build_grid(make_problem(square(), 0.1, 0.2, ZERO))
        values = np.random.default_rng(3).normal(size=grid.node_count) / 3.0
        field = ScalarField(grid, values)
        path = write_field_csv(field, tmp_path / 'u.csv')
        assert path.read_text().splitlines()[0] == 'x,y,value'
        back = read_field_csv(path, grid)
        np.testing.assert_array_equal(back.values, field.values)

    def test_csv_row_count_1d(self, tmp_path, unit_interval_grid):
        path = export(constant_field(unit_interval_grid, 1.5), 'csv', tmp_path / 'u.csv')
        lines = path.read_text().splitlines()
        assert lines[0] == 'x,value'
        assert len(lines) == 1 + unit_interval_grid.node_count

    def test_csv_wrong_grid(self, tmp_path, unit_interval_grid):
        other = build_grid(make_problem(interval(0.0, 2.0), 0.25, 0.25, ZERO))
        path = write_field_csv(constant_field(other, 1.0), tmp_path / 'u.csv')
        with pytest.raises(IngestionError, match='rows'):
            read_field_csv(path, unit_interval_grid)

    def test_csv_bad_header(self, tmp_path, unit_interval_grid):
        path = tmp_path / 'u.csv'
        path.write_text('a,b\n0,0\n')
        with pytest.raises(IngestionError, match='header'):
            read_field_csv(path, unit_interval_grid)

    def test_pgm_constant_field(self, tmp_path):
        grid = build_grid(make_problem(square(), 0.25, 0.25, ZERO))
        path = write_pgm(constant_field(grid, 7.0), tmp_path / 'u.pgm')
        lines = path.read_text().splitlines()
        assert lines[:3] == ['P2', '3 3', '255']
        assert all(set(line.split()) == {'0'} for line in lines[3:])
        assert path.read_text().endswith('\n')

    def test_pgm_rows_run_top_down(self, tmp_path):
        """The first image row holds the largest y."""
        grid = build_grid(make_problem(square(), 0.25, 0.25, ZERO))
        field = ScalarField(grid, grid.coords[:, 1])
        lines = write_pgm(field, tmp_path / 'y.pgm').read_text().splitlines()
        assert lines[3].split() == ['255'] * 3
        assert lines[5].split() == ['0'] * 3

    def test_pgm_needs_2d(self, tmp_path, unit_interval_grid):
        with pytest.raises(UsageError):
            export(constant_field(unit_interval_grid, 1.0), 'pgm', tmp_path / 'u.pgm')
