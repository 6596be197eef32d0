"""
CSV and PGM import/export of scalar fields and point clouds.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from lattice.domain import GridDomain
from lattice.fields import ScalarField
from models.exceptions import IngestionError, UsageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = '%.17g'


def _axis_names(dim: int):
    return ['x'] if dim == 1 else ['x', 'y']


def write_field_csv(field: ScalarField, path: PathLike) -> Path:
    """Write `x,value` (1D) or `x,y,value` (2D) rows in node order."""
    path = Path(path)
    grid = field.grid
    header = ','.join(_axis_names(grid.dim) + ['value'])
    table = np.column_stack([grid.coords, field.values])
    np.savetxt(path, table, fmt=FLOAT_FORMAT, delimiter=',', header=header, comments='')
    logger.debug(f"Wrote {grid.node_count} rows to {path}")
    return path


def read_field_csv(path: PathLike, grid: GridDomain) -> ScalarField:
    """
    Read a field written by write_field_csv back onto a grid.

    Raises:
        IngestionError: unreadable file, wrong header, or rows that do not match
            the grid's nodes in order.
    """
    path = Path(path)
    try:
        with open(path, encoding='utf-8') as handle:
            header = handle.readline().strip()
            table = np.loadtxt(handle, delimiter=',', ndmin=2)
    except (OSError, ValueError) as e:
        raise IngestionError(f"cannot read field CSV {path}: {e}") from e

    expected = ','.join(_axis_names(grid.dim) + ['value'])
    if header != expected:
        raise IngestionError(f"{path}: header '{header}' does not match '{expected}'")
    if table.shape != (grid.node_count, grid.dim + 1):
        raise IngestionError(
            f"{path}: {table.shape[0]} rows for a grid of {grid.node_count} nodes"
        )
    if np.max(np.abs(table[:, :grid.dim] - grid.coords)) > 1e-9 * max(grid.h, 1.0):
        raise IngestionError(f"{path}: node coordinates do not match the grid")
    try:
        return ScalarField(grid, table[:, grid.dim])
    except ValueError as e:
        raise IngestionError(f"{path}: {e}") from e


def write_pgm(field: ScalarField, path: PathLike) -> Path:
    """
    Write a 2D field as a plain (P2) PGM over the interior nodes.

    Columns run along x, rows along y from top (largest y) to bottom. Values
    are mapped affinely from [min, max] onto [0, 255]; a constant field maps to
    0, as do pixels without an interior node.

    Raises:
        UsageError: the field is not two-dimensional.
    """
    grid = field.grid
    if grid.dim != 2:
        raise UsageError("PGM export needs a 2D field")
    path = Path(path)
    lattice = grid.lattice[grid.interior_nodes]
    values = field.values[grid.interior_nodes]
    lo = lattice.min(axis=0)
    width, height = (lattice.max(axis=0) - lo + 1).tolist()

    vmin, vmax = float(values.min()), float(values.max())
    if vmax > vmin:
        levels = np.rint(255.0 * (values - vmin) / (vmax - vmin)).astype(int)
    else:
        levels = np.zeros(len(values), dtype=int)
    image = np.zeros((height, width), dtype=int)
    image[height - 1 - (lattice[:, 1] - lo[1]), lattice[:, 0] - lo[0]] = levels

    lines = ['P2', f'{width} {height}', '255']
    lines.extend(' '.join(str(v) for v in row) for row in image)
    path.write_text('\n'.join(lines) + '\n', encoding='ascii')
    logger.debug(f"Wrote {width}x{height} PGM to {path}")
    return path


def write_points_csv(points: np.ndarray, path: PathLike, dim: Optional[int] = None) -> Path:
    """Point cloud as CSV with header `x` or `x,y`."""
    path = Path(path)
    points = np.asarray(points, dtype=float)
    if dim is None:
        dim = points.shape[1] if points.ndim == 2 else 1
    header = ','.join(_axis_names(dim))
    np.savetxt(path, points.reshape(-1, dim), fmt=FLOAT_FORMAT, delimiter=',', header=header, comments='')
    return path


def export(field: ScalarField, fmt: str, path: PathLike) -> Path:
    """Export a field as `csv` or `pgm`."""
    if fmt == 'csv':
        return write_field_csv(field, path)
    if fmt == 'pgm':
        return write_pgm(field, path)
    raise UsageError(f"unknown export format '{fmt}'")
