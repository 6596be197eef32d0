"""
Fixed-point value iteration for the discrete dynamic programming operators.

PayOrLeave:          T[u] = min{ (sup + inf)/2, max{0, sup - eps} }
GradientConstraint:  T[u] = min{ (sup + inf)/2, sup - eps }
InfinityHarmonic:    T[u] = (sup + inf)/2

sup and inf run over the closed lattice ball N(x). Strip values are the
boundary datum and never change.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from lattice.domain import GridDomain, build_grid
from lattice.fields import ScalarField, sample_field
from models.dto import EpsilonStudy, IterationReport
from models.exceptions import ConfigurationError, ContractViolation
from models.schema import ProblemSpec

logger = logging.getLogger(__name__)

# Rows per worker chunk below which a sweep stays on one thread.
PARALLEL_CHUNK = 50_000


class OperatorKind(str, Enum):
    PAY_OR_LEAVE = 'pay_or_leave'
    GRADIENT_CONSTRAINT = 'gradient_constraint'
    INFINITY_HARMONIC = 'infinity_harmonic'

    @classmethod
    def coerce(cls, kind: Union['OperatorKind', str]) -> 'OperatorKind':
        try:
            return cls(kind)
        except ValueError as e:
            raise ConfigurationError(f"unknown operator '{kind}'", key='operator') from e


def _update(neighbors: np.ndarray, kind: OperatorKind, eps: float) -> np.ndarray:
    sup = neighbors.max(axis=-1)
    inf = neighbors.min(axis=-1)
    avg = 0.5 * (sup + inf)
    if kind is OperatorKind.INFINITY_HARMONIC:
        return avg
    if kind is OperatorKind.GRADIENT_CONSTRAINT:
        return np.minimum(avg, sup - eps)
    return np.minimum(avg, np.maximum(0.0, sup - eps))


def _active_rows(grid: GridDomain, mask: Optional[np.ndarray]) -> np.ndarray:
    """Interior rows to update; `mask` is a boolean node set inside the interior."""
    if mask is None:
        return np.arange(len(grid.interior_nodes))
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (grid.node_count,):
        raise ContractViolation(f"mask has shape {mask.shape}, grid has {grid.node_count} nodes")
    if np.any(mask & ~grid.is_interior):
        raise ContractViolation("mask must contain interior nodes only")
    return grid.interior_row[np.flatnonzero(mask)]


def _sweep(values: np.ndarray, table: np.ndarray, kind: OperatorKind, eps: float,
           workers: int = 1) -> np.ndarray:
    """T evaluated on `values` for each row of `table` (pure, Jacobi)."""
    n = len(table)
    if workers <= 1 or n < 2 * PARALLEL_CHUNK:
        return _update(values[table], kind, eps)
    out = np.empty(n)
    bounds = np.linspace(0, n, workers + 1).astype(int)

    def work(i):
        lo, hi = bounds[i], bounds[i + 1]
        out[lo:hi] = _update(values[table[lo:hi]], kind, eps)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, range(workers)))
    return out


def apply_operator(grid: GridDomain, field: ScalarField, kind: Union[OperatorKind, str],
                   mask: Optional[np.ndarray] = None) -> ScalarField:
    """
    One Jacobi sweep: every (masked) interior value becomes T evaluated on the input.

    Args:
        grid: Grid the field lives on.
        field: Input field; strip values act as boundary data.
        kind: Operator to apply.
        mask: Optional interior node set; other interior nodes are frozen.

    Returns:
        New field; the input is not modified.
    """
    if field.grid is not grid:
        raise ContractViolation("field does not live on this grid")
    kind = OperatorKind.coerce(kind)
    rows = _active_rows(grid, mask)
    values = field.values.copy()
    values[grid.interior_nodes[rows]] = _sweep(
        field.values, grid.neighbor_table[rows], kind, grid.epsilon, settings.runtime.workers
    )
    return ScalarField(grid, values)


def residual(grid: GridDomain, field: ScalarField, kind: Union[OperatorKind, str],
             mask: Optional[np.ndarray] = None) -> float:
    """sup over (masked) interior nodes of |T[u] - u|."""
    kind = OperatorKind.coerce(kind)
    rows = _active_rows(grid, mask)
    if len(rows) == 0:
        return 0.0
    new = _update(field.values[grid.neighbor_table[rows]], kind, grid.epsilon)
    return float(np.max(np.abs(new - field.values[grid.interior_nodes[rows]])))


def oscillation(grid: GridDomain, field: ScalarField) -> ScalarField:
    """A(x) = sup_N(x) u - inf_N(x) u on interior nodes; 0 on the strip."""
    neighbors = field.values[grid.neighbor_table]
    values = np.zeros(grid.node_count)
    values[grid.interior_nodes] = neighbors.max(axis=1) - neighbors.min(axis=1)
    return ScalarField(grid, values)


def initial_seed(grid: GridDomain, boundary: ScalarField, kind: OperatorKind,
                 rows: np.ndarray, masked: bool) -> float:
    """max of the frozen data for the min-type operators, their mean for InfinityHarmonic."""
    if masked:
        referenced = np.unique(grid.neighbor_table[rows])
        updated = np.zeros(grid.node_count, dtype=bool)
        updated[grid.interior_nodes[rows]] = True
        frozen = boundary.values[referenced[~updated[referenced]]]
    else:
        frozen = boundary.strip_values
    if frozen.size == 0:
        return 0.0
    if kind is OperatorKind.INFINITY_HARMONIC:
        # fsum keeps the seed independent of node order
        return math.fsum(frozen.tolist()) / frozen.size
    return float(np.max(frozen))


def _gauss_seidel_sweep(u: np.ndarray, table: np.ndarray, targets: np.ndarray,
                        kind: OperatorKind, eps: float) -> Tuple[float, bool]:
    change, monotone = 0.0, True
    for row, node in zip(table, targets):
        new = float(_update(u[row], kind, eps))
        delta = new - u[node]
        if delta > 0:
            monotone = False
        change = max(change, abs(delta))
        u[node] = new
    return change, monotone


def value_iterate(grid: GridDomain, boundary: ScalarField, kind: Union[OperatorKind, str],
                  tol: Optional[float] = None, max_iter: Optional[int] = None, *,
                  mask: Optional[np.ndarray] = None, sweep: Optional[str] = None,
                  initial: Optional[np.ndarray] = None) -> Tuple[ScalarField, IterationReport]:
    """
    Iterate u_{n+1} = T[u_n] to a fixed point.

    The interior is seeded with max over the strip of F (PayOrLeave and
    GradientConstraint) or the mean strip value (InfinityHarmonic). With a
    mask, only masked nodes move and the seed is taken from the frozen nodes
    they reference.

    Args:
        grid: Grid.
        boundary: Field whose non-updated values are the boundary data.
        kind: Operator.
        tol: Stop once sup|T[u] - u| <= tol.
        max_iter: Sweep budget; exhausting it returns the field flagged unconverged.
        mask: Optional interior node set to update.
        sweep: 'jacobi' (default) or 'gauss_seidel'.
        initial: Optional interior seed values overriding the default seed.

    Returns:
        (field, IterationReport)
    """
    if boundary.grid is not grid:
        raise ContractViolation("boundary field does not live on this grid")
    kind = OperatorKind.coerce(kind)
    tol = settings.dpp.tol if tol is None else tol
    max_iter = settings.dpp.max_iter if max_iter is None else max_iter
    sweep = sweep or settings.dpp.sweep
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}", key='tol')
    if sweep not in ('jacobi', 'gauss_seidel'):
        raise ConfigurationError(f"unknown sweep '{sweep}'", key='sweep')

    rows = _active_rows(grid, mask)
    table = grid.neighbor_table[rows]
    targets = grid.interior_nodes[rows]
    u = boundary.values.copy()
    if initial is not None:
        u[targets] = np.asarray(initial, dtype=float)[: len(targets)]
    else:
        u[targets] = initial_seed(grid, boundary, kind, rows, mask is not None)

    start = time.perf_counter()
    workers = settings.runtime.workers
    monotone, converged, iterations, change = True, False, 0, math.inf
    while iterations < max_iter and len(targets):
        if sweep == 'jacobi':
            new = _sweep(u, table, kind, grid.epsilon, workers)
            delta = new - u[targets]
            change = float(np.max(np.abs(delta)))
            if monotone and np.any(delta > 0):
                monotone = False
            u[targets] = new
        else:
            change, sweep_monotone = _gauss_seidel_sweep(u, table, targets, kind, grid.epsilon)
            monotone = monotone and sweep_monotone
        iterations += 1
        if change <= tol:
            if sweep == 'jacobi' or float(np.max(np.abs(_update(u[table], kind, grid.epsilon) - u[targets]))) <= tol:
                converged = True
                break
        if iterations % settings.dpp.log_every == 0:
            logger.debug(f"{kind.value}: sweep {iterations}, change {change:.3e}")
    if not len(targets):
        converged = True

    result = ScalarField(grid, u)
    final = residual(grid, result, kind, mask)
    report = IterationReport(
        iterations=iterations,
        final_residual=final,
        monotone=monotone,
        wall_time=time.perf_counter() - start,
        converged=converged,
    )
    if converged:
        logger.info(f"{kind.value} converged: {report}")
    else:
        logger.warning(f"{kind.value} did not converge within {max_iter} sweeps: {report}")
    return result, report


def solve(spec: ProblemSpec, kind: Union[OperatorKind, str] = OperatorKind.PAY_OR_LEAVE,
          tol: Optional[float] = None, max_iter: Optional[int] = None,
          sweep: Optional[str] = None) -> Tuple[ScalarField, IterationReport]:
    """Build the grid for a problem, sample its boundary datum and iterate."""
    grid = build_grid(spec)
    boundary = sample_field(grid, spec.boundary)
    return value_iterate(grid, boundary, kind, tol, max_iter, sweep=sweep)


def epsilon_study(spec: ProblemSpec, eps_list: Sequence[float],
                  kind: Union[OperatorKind, str] = OperatorKind.PAY_OR_LEAVE,
                  tol: Optional[float] = None, max_iter: Optional[int] = None,
                  reference=None) -> EpsilonStudy:
    """
    Solve for every epsilon (keeping epsilon/h fixed) and compare the solutions.

    Solutions are compared on the interior nodes of the coarsest grid, which
    must be lattice points of every finer grid.

    Args:
        spec: Base problem; its epsilon/h ratio is kept for every entry.
        eps_list: Epsilons to solve for.
        kind: Operator.
        tol, max_iter: Iteration controls.
        reference: Optional datum (closed form) to measure each solution against.

    Returns:
        EpsilonStudy with D[i][j] = sup over common nodes |u_i - u_j|.

    Raises:
        ConfigurationError: lattices are incompatible.
    """
    if not eps_list:
        raise ConfigurationError("eps_list is empty", key='eps_list')
    ratio = spec.h / spec.epsilon
    specs = [spec.model_copy(update={'epsilon': float(e), 'h': float(e) * ratio}) for e in eps_list]
    grids = [build_grid(s) for s in specs]

    coarse = grids[int(np.argmax([g.h for g in grids]))]
    common_lattice = coarse.lattice[coarse.interior_nodes]
    locators: List[np.ndarray] = []
    for grid in grids:
        scale = coarse.h / grid.h
        if abs(scale - round(scale)) > 1e-9 * scale:
            raise ConfigurationError(
                f"h={grid.h} does not divide the coarsest spacing {coarse.h}", key='eps_list'
            )
        idx = grid.locate(common_lattice * int(round(scale)))
        if np.any(idx < 0):
            raise ConfigurationError("coarse nodes missing from a finer grid", key='eps_list')
        locators.append(idx)

    def run(i: int):
        return value_iterate(grids[i], sample_field(grids[i], specs[i].boundary), kind, tol, max_iter)

    with ThreadPoolExecutor(max_workers=max(1, settings.runtime.workers)) as pool:
        results = list(pool.map(run, range(len(grids))))

    samples = [field.values[idx] for (field, _), idx in zip(results, locators)]
    n = len(samples)
    distances = [[float(np.max(np.abs(samples[i] - samples[j]))) for j in range(n)] for i in range(n)]

    reference_errors = None
    if reference is not None:
        reference_errors = []
        for grid, (field, _) in zip(grids, results):
            ref = sample_field(grid, reference)
            reference_errors.append(field.sup_distance(ref))
        logger.info(f"epsilon study errors vs reference: {reference_errors}")

    return EpsilonStudy(
        eps=[float(e) for e in eps_list],
        h=[g.h for g in grids],
        distances=distances,
        reference_errors=reference_errors,
        reports=[report for _, report in results],
    )
