"""
Scalar fields on a GridDomain and evaluation of boundary datums.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from lattice.domain import GridDomain
from models.exceptions import ConfigurationError, ContractViolation, IngestionError
from models.schema import AffineDatum, ConstantDatum, OracleDatum, RadialDatum, TableDatum
from oracles import closed_form

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Finite real values on every node (interior and strip) of a grid."""
    grid: GridDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.node_count,):
            raise ContractViolation(
                f"field has shape {values.shape}, grid has {self.grid.node_count} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ContractViolation("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_nodes]

    @property
    def strip_values(self) -> np.ndarray:
        return self.values[self.grid.strip_nodes]

    def with_values(self, values: np.ndarray) -> 'ScalarField':
        return ScalarField(self.grid, np.array(values, dtype=float))

    def with_interior(self, interior: np.ndarray) -> 'ScalarField':
        """Copy with interior values replaced; strip values kept."""
        values = self.values.copy()
        values[self.grid.interior_nodes] = interior
        return ScalarField(self.grid, values)

    def sup_distance(self, other: 'ScalarField', interior_only: bool = True) -> float:
        if other.grid is not self.grid:
            raise ContractViolation("fields live on different grids")
        diff = np.abs(self.values - other.values)
        if interior_only:
            diff = diff[self.grid.interior_nodes]
        return float(np.max(diff)) if diff.size else 0.0


def constant_field(grid: GridDomain, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.node_count, float(value)))


def _oracle_values(grid: GridDomain, datum: OracleDatum) -> np.ndarray:
    coords = grid.coords
    if datum.name == 'gradient_constraint_1d':
        if grid.dim != 1:
            raise ConfigurationError("oracle gradient_constraint_1d needs a 1D domain", key='boundary.name')
        return np.array([closed_form.gradient_constraint_1d(x, extend=True) for x in coords[:, 0]])
    center = np.zeros(grid.dim) if datum.center is None else np.asarray(datum.center, dtype=float)
    if center.shape != (grid.dim,):
        raise ConfigurationError(f"oracle center must have {grid.dim} component(s)", key='boundary.center')
    radii = np.linalg.norm(coords - center, axis=1)
    if datum.name == 'limit_radial':
        return closed_form.limit_radial_profile(datum.radius, datum.kappa, radii)
    spec = closed_form.RadialSpec(N=grid.dim, R=datum.radius, kappa=datum.kappa,
                                  lambda0=datum.lambda0, p=datum.p)
    return closed_form.dead_core_profile(spec, radii)


def _table_values(grid: GridDomain, datum: TableDatum,
                  required: Literal['strip', 'interior', 'all']) -> np.ndarray:
    if datum.path is not None:
        from lattice.field_io import read_field_csv
        return read_field_csv(datum.path, grid).values.copy()
    values = np.full(grid.node_count, np.nan)
    for number, row in enumerate(datum.rows):
        if len(row) != grid.dim + 1:
            raise IngestionError(f"table row {number} has {len(row)} entries, expected {grid.dim + 1}")
        lat = np.rint(np.asarray(row[:-1]) / grid.h).astype(np.int64)
        if np.max(np.abs(lat * grid.h - np.asarray(row[:-1]))) > 1e-9 * max(grid.h, 1.0):
            raise IngestionError(f"table row {number} is not on the lattice: {row[:-1]}")
        idx = int(grid.locate(lat[None, :])[0])
        if idx >= 0:
            values[idx] = row[-1]
    needed = {'strip': grid.strip_nodes, 'interior': grid.interior_nodes}.get(required, np.arange(grid.node_count))
    missing = needed[np.isnan(values[needed])]
    if missing.size:
        raise IngestionError(
            f"table datum misses {missing.size} node(s), first at {grid.coords[missing[0]].tolist()}"
        )
    values[np.isnan(values)] = datum.interior
    return values


def sample_field(grid: GridDomain, datum,
                 required: Literal['strip', 'interior', 'all'] = 'strip') -> ScalarField:
    """
    Evaluate a datum on every node of a grid.

    Radial and table datums carry their strip values explicitly and fill the
    interior with their `interior` default; the others are pointwise formulas.

    Args:
        grid: Target grid.
        datum: A datum model, or a bare number for a constant.
        required: Which nodes a table datum must cover.

    Raises:
        IngestionError: A table datum misses a required node.
    """
    if isinstance(datum, (int, float)):
        return constant_field(grid, datum)
    if isinstance(datum, ConstantDatum):
        return constant_field(grid, datum.value)
    if isinstance(datum, AffineDatum):
        slope = np.asarray(datum.slope, dtype=float)
        if slope.shape != (grid.dim,):
            raise ConfigurationError(f"affine slope must have {grid.dim} component(s)", key='slope')
        return ScalarField(grid, grid.coords @ slope + datum.offset)
    if isinstance(datum, RadialDatum):
        values = np.where(grid.is_interior, datum.interior, datum.kappa)
        return ScalarField(grid, values.astype(float))
    if isinstance(datum, TableDatum):
        return ScalarField(grid, _table_values(grid, datum, required))
    if isinstance(datum, OracleDatum):
        return ScalarField(grid, _oracle_values(grid, datum))
    raise ConfigurationError(f"unsupported datum {datum!r}", key='boundary')


def sample_lambda(grid: GridDomain, lambda0: Union[float, object]) -> np.ndarray:
    """Interior lambda0 values; must be bounded below by a positive constant."""
    values = sample_field(grid, lambda0, required='interior').interior_values
    if not np.all(values > 0):
        raise ConfigurationError("lambda0 must be strictly positive on the interior", key='lambda0')
    return values
