"""
Discrete p-Dirichlet energy with the lambda0 * u_+ penalty.

J(u) = sum_cells h^N |grad_h u|^p / p + sum_interior h^N lambda0 s(u),

with forward differences per axis on each lattice cell and s either the
exact positive part or its smoothing s_d(t) = (t + sqrt(t^2 + d^2)) / 2.
"""
import logging
from typing import Tuple, Union

import numpy as np

from lattice.domain import GridDomain
from lattice.fields import ScalarField
from models.exceptions import ContractViolation, NumericalFailure

logger = logging.getLogger(__name__)


class PlapEnergy:
    """Cell/node assembly of the energy and its gradient with respect to interior values."""

    def __init__(self, grid: GridDomain, p: float, lambda0: Union[float, np.ndarray],
                 boundary: ScalarField):
        if boundary.grid is not grid:
            raise ContractViolation("boundary field does not live on this grid")
        self.grid = grid
        self.p = float(p)
        self.volume = grid.cell_volume
        self.weights = np.broadcast_to(np.asarray(lambda0, dtype=float),
                                       (len(grid.interior_nodes),)) * self.volume
        self.base = boundary.values.copy()
        self.free = grid.interior_nodes

        forward = np.stack(
            [grid.locate(grid.lattice + np.eye(grid.dim, dtype=np.int64)[d]) for d in range(grid.dim)],
            axis=1,
        )
        present = forward >= 0
        # a missing neighbor points back at the anchor, so its difference is 0
        target = np.where(present, forward, np.arange(grid.node_count)[:, None])
        touches = grid.is_interior | np.any(grid.is_interior[target], axis=1)
        keep = np.any(present, axis=1) & touches
        self.anchor = np.flatnonzero(keep)
        self.forward = target[keep]
        logger.debug(f"p-energy on {len(self.anchor)} cells, {len(self.free)} free nodes, p={self.p:g}")

    def full(self, x: np.ndarray) -> np.ndarray:
        u = self.base.copy()
        u[self.free] = x
        return u

    def gradient_term(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
        """Dirichlet part and its gradient with respect to every node value."""
        h = self.grid.h
        diffs = (u[self.forward] - u[self.anchor][:, None]) / h
        squares = np.sum(diffs * diffs, axis=1)
        with np.errstate(over='ignore', invalid='ignore'):
            powers = squares ** (0.5 * self.p)
            value = self.volume * float(np.sum(powers)) / self.p
            coeff = self.volume * squares ** (0.5 * self.p - 1.0)
        if not np.isfinite(value) or not np.all(np.isfinite(coeff)):
            raise NumericalFailure(
                f"|grad u|^p overflowed at p={self.p:g}; rescale the boundary data or lower p",
                report={'p': self.p, 'max_gradient': float(np.sqrt(np.max(squares)))},
            )
        flux = coeff[:, None] * diffs / h
        n = self.grid.node_count
        grad = -np.bincount(self.anchor, weights=flux.sum(axis=1), minlength=n)
        for d in range(self.grid.dim):
            grad += np.bincount(self.forward[:, d], weights=flux[:, d], minlength=n)
        return value, grad

    def positive_term(self, x: np.ndarray, delta: float) -> Tuple[float, np.ndarray]:
        """lambda0 penalty on interior values and its gradient (a subgradient when delta = 0)."""
        if delta > 0:
            root = np.sqrt(x * x + delta * delta)
            s = 0.5 * (x + root)
            ds = 0.5 * (1.0 + x / root)
        else:
            s = np.maximum(x, 0.0)
            ds = (x > 0).astype(float)
        return float(np.dot(self.weights, s)), self.weights * ds

    def smoothed(self, x: np.ndarray, delta: float) -> Tuple[float, np.ndarray]:
        """Smoothed energy and gradient with respect to interior values."""
        value, grad = self.gradient_term(self.full(x))
        pos_value, pos_grad = self.positive_term(x, delta)
        return value + pos_value, grad[self.free] + pos_grad

    def value(self, u: np.ndarray) -> float:
        """Exact (unsmoothed) energy of a full node vector."""
        value, _ = self.gradient_term(u)
        pos_value, _ = self.positive_term(u[self.free], 0.0)
        return value + pos_value

    def residual(self, u: np.ndarray) -> float:
        """Sup distance from 0 to the subdifferential at interior nodes, in PDE units."""
        _, grad = self.gradient_term(u)
        g = grad[self.free] / self.volume
        lam = self.weights / self.volume
        x = u[self.free]
        res = np.where(x > 0, np.abs(g + lam), np.abs(g))
        at_zero = x == 0
        res[at_zero] = np.maximum(0.0, np.maximum(g[at_zero], -(g[at_zero] + lam[at_zero])))
        return float(np.max(res)) if res.size else 0.0


def energy(grid: GridDomain, field: ScalarField, p: float,
           lambda0: Union[float, np.ndarray]) -> float:
    """
    Exact discrete energy of a field whose strip values carry the boundary datum.

    Raises:
        NumericalFailure: |grad u|^p overflows double precision.
    """
    return PlapEnergy(grid, p, lambda0, field).value(field.values)


def euler_lagrange_residual(grid: GridDomain, field: ScalarField, p: float,
                            lambda0: Union[float, np.ndarray]) -> float:
    """
    sup over interior nodes of the distance from 0 to the energy subdifferential,
    divided by h^N so it reads as a PDE residual.
    """
    return PlapEnergy(grid, p, lambda0, field).residual(field.values)
