"""
Shared problem fixtures.
"""
import pytest

from dpp.engine import OperatorKind, value_iterate
from lattice.domain import build_grid
from lattice.fields import sample_field
from models.schema import ProblemSpec


def make_problem(domain: dict, h: float, epsilon: float, boundary: dict, **extra) -> ProblemSpec:
    """ProblemSpec from plain dictionaries."""
    return ProblemSpec.model_validate(
        {'domain': domain, 'h': h, 'epsilon': epsilon, 'boundary': boundary, **extra}
    )


def interval(a: float, b: float) -> dict:
    return {'kind': 'interval', 'a': a, 'b': b}


def square(a: float = 0.0, b: float = 1.0) -> dict:
    return {'kind': 'rectangle', 'a1': a, 'b1': b, 'a2': a, 'b2': b}


GRADIENT_CONSTRAINT = {'kind': 'oracle', 'name': 'gradient_constraint_1d'}


@pytest.fixture(scope='session')
def gradient_problem():
    """The (-1, 4) problem with F(-1) = 1, F(4) = -1, eps = 0.05, h = eps/4."""
    return make_problem(interval(-1.0, 4.0), 0.0125, 0.05, GRADIENT_CONSTRAINT)


@pytest.fixture(scope='session')
def gradient_solution(gradient_problem):
    """(grid, boundary, u, report) for the PayOrLeave solve of the (-1, 4) problem."""
    grid = build_grid(gradient_problem)
    boundary = sample_field(grid, gradient_problem.boundary)
    u, report = value_iterate(grid, boundary, OperatorKind.PAY_OR_LEAVE)
    return grid, boundary, u, report


@pytest.fixture
def unit_interval_grid():
    """(0, 1) with h = eps = 0.25: interior 0.25, 0.5, 0.75; strip 0 and 1."""
    return build_grid(make_problem(interval(0.0, 1.0), 0.25, 0.25, {'kind': 'constant', 'value': 0.0}))
