"""
Minimizer of the discrete p-energy and p -> infinity sweeps.

Two phases: L-BFGS-B on the delta-smoothed energy inside the box
[min{0, min g}, max g], then an orthant polish on the exact energy. The
polish fixes a sign per node, solves the smooth bound-constrained problem on
that orthant and flips nodes at 0 whose one-sided derivative shows descent.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from analysis.free_boundary import hausdorff, lipschitz_seminorm, positivity_and_boundary
from config.settings import settings
from lattice.domain import GridDomain, build_grid
from lattice.fields import ScalarField, sample_field, sample_lambda
from models.dto import IterationReport, SweepRow
from models.exceptions import ConfigurationError, NumericalFailure
from models.schema import ProblemSpec
from plap.energy import PlapEnergy

logger = logging.getLogger(__name__)


@dataclass
class PlapOptions:
    """Solver options; delta None means h^2."""
    p: float
    delta: Optional[float] = None
    tol_grad: float = settings.plap.tol_grad
    max_iter: int = settings.plap.max_iter
    memory: int = settings.plap.memory
    max_polish_rounds: int = settings.plap.max_polish_rounds
    max_restarts: int = settings.plap.max_restarts

    def __post_init__(self):
        if not 2 <= self.p <= settings.plap.p_max:
            raise ConfigurationError(f"p={self.p} outside [2, {settings.plap.p_max:g}]", key='p')
        if self.delta is not None and self.delta < 0:
            raise ConfigurationError(f"delta must be >= 0, got {self.delta}", key='delta')
        if self.tol_grad <= 0:
            raise ConfigurationError(f"tol_grad must be positive, got {self.tol_grad}", key='tol_grad')
        if self.max_restarts < 0:
            raise ConfigurationError(f"max_restarts must be >= 0, got {self.max_restarts}", key='max_restarts')


def _lbfgs(fun: Callable[[np.ndarray], Tuple[float, np.ndarray]], x0: np.ndarray,
           lower: np.ndarray, upper: np.ndarray, options: PlapOptions, gtol: float):
    result = minimize(
        fun, x0, jac=True, method='L-BFGS-B',
        bounds=list(zip(lower, upper)),
        options={
            'maxiter': options.max_iter,
            'maxfun': 4 * options.max_iter,
            'maxcor': options.memory,
            'ftol': np.finfo(float).eps,
            'gtol': gtol,
        },
    )
    if not np.isfinite(result.fun) or not np.all(np.isfinite(result.x)):
        raise NumericalFailure(
            "non-finite value in L-BFGS-B line search",
            report={'message': str(result.message), 'iterations': int(result.get('nit', 0))},
        )
    return result


def _polish(assembly: PlapEnergy, x: np.ndarray, lo: float, hi: float,
            options: PlapOptions, gtol: float) -> Tuple[np.ndarray, int, int]:
    """Orthant-wise solves of the exact energy; returns (x, iterations, rounds)."""
    weights = assembly.weights
    if hi > 0:
        positive = x >= 0
    else:
        positive = np.zeros(len(x), dtype=bool)
    iterations, rounds = 0, 0
    for rounds in range(1, options.max_polish_rounds + 1):
        lower = np.where(positive, 0.0, lo)
        upper = np.where(positive, hi, min(0.0, hi))
        linear = np.where(positive, weights, 0.0)

        def fun(v):
            value, grad = assembly.gradient_term(assembly.full(v))
            return value + float(np.dot(linear, v)), grad[assembly.free] + linear

        result = _lbfgs(fun, np.clip(x, lower, upper), lower, upper, options, gtol)
        x, iterations = result.x, iterations + int(result.get('nit', 0))

        _, grad = assembly.gradient_term(assembly.full(x))
        slope = grad[assembly.free]
        at_zero = x == 0.0
        to_negative = positive & at_zero & (slope > gtol) & (lo < 0)
        to_positive = ~positive & at_zero & (slope + weights < -gtol) & (hi > 0)
        flips = int(to_negative.sum() + to_positive.sum())
        logger.debug(f"polish round {rounds}: {result.get('nit', 0)} iterations, {flips} sign flips")
        if flips == 0:
            break
        positive = (positive & ~to_negative) | to_positive
    else:
        logger.warning(f"polish stopped after {options.max_polish_rounds} rounds with sign flips pending")
    return x, iterations, rounds


def minimize_on_grid(grid: GridDomain, boundary: ScalarField, lambda0: Union[float, np.ndarray],
                     options: PlapOptions) -> Tuple[ScalarField, IterationReport]:
    """
    Minimize the p-energy with strip values fixed to the boundary field.

    Returns:
        (minimizer, IterationReport); final_residual is the Euler-Lagrange
        residual in PDE units and converged means it is <= tol_grad.

    Raises:
        NumericalFailure: non-finite energy or line-search values.
    """
    start = time.perf_counter()
    assembly = PlapEnergy(grid, options.p, lambda0, boundary)
    strip = boundary.strip_values
    lo, hi = min(0.0, float(strip.min())), float(strip.max())
    n = len(grid.interior_nodes)

    if lo == hi or n == 0:
        # g is a constant c <= 0: the box pins every interior value to c
        field = boundary.with_interior(np.full(n, lo))
        res = assembly.residual(field.values)
        report = IterationReport(iterations=0, final_residual=res, monotone=True,
                                 wall_time=time.perf_counter() - start,
                                 converged=res <= options.tol_grad)
        logger.info(f"p={options.p:g}: box [{lo:g}, {hi:g}] is a point, {report}")
        return field, report

    delta = grid.h ** 2 if options.delta is None else options.delta
    gtol = 0.1 * options.tol_grad * grid.cell_volume

    x0 = np.clip(boundary.interior_values, lo, hi)
    lower, upper = np.full(n, lo), np.full(n, hi)
    initial_energy = assembly.value(boundary.values)
    smooth = _lbfgs(lambda v: assembly.smoothed(v, delta), x0, lower, upper, options, gtol)
    x, iterations, rounds = _polish(assembly, smooth.x, lo, hi, options, gtol)
    iterations += int(smooth.get('nit', 0))

    res = assembly.residual(assembly.full(x))
    for restart in range(1, options.max_restarts + 1):
        if res <= options.tol_grad:
            break
        logger.debug(f"p={options.p:g}: restart {restart} from residual {res:.3e}")
        x, more, extra = _polish(assembly, x, lo, hi, options, gtol)
        iterations, rounds = iterations + more, rounds + extra
        res = assembly.residual(assembly.full(x))

    field = boundary.with_interior(x)
    final_energy = assembly.value(field.values)
    report = IterationReport(
        iterations=int(iterations),
        final_residual=res,
        monotone=final_energy <= initial_energy,
        wall_time=time.perf_counter() - start,
        converged=res <= options.tol_grad,
    )
    logger.info(f"p={options.p:g}: energy {initial_energy:.6g} -> {final_energy:.6g}, "
                f"{rounds} polish round(s), {report}")
    if not report.converged:
        logger.warning(f"p={options.p:g}: residual {res:.3e} above tol_grad {options.tol_grad:.1e}")
    return field, report


def minimize_jp(spec: ProblemSpec, options: PlapOptions) -> Tuple[ScalarField, IterationReport]:
    """Build the grid for a problem and minimize its p-energy."""
    grid = build_grid(spec)
    boundary = sample_field(grid, spec.boundary)
    return minimize_on_grid(grid, boundary, sample_lambda(grid, spec.lambda0), options)


def _sweep_one(spec: ProblemSpec, reference: ScalarField, p: float,
               base: Optional[PlapOptions]) -> SweepRow:
    grid = reference.grid
    try:
        options = PlapOptions(
            p=p,
            delta=base.delta if base else None,
            tol_grad=base.tol_grad if base else settings.plap.tol_grad,
            max_iter=base.max_iter if base else settings.plap.max_iter,
        )
        field, report = minimize_on_grid(
            grid, sample_field(grid, spec.boundary), sample_lambda(grid, spec.lambda0), options
        )
    except NumericalFailure as e:
        logger.error(f"p={p:g} failed: {e}", exc_info=True)
        return SweepRow(p=p, sup_dist=None, lipschitz=None, hausdorff=None, converged=False, error=str(e))

    _, fb = positivity_and_boundary(grid, field)
    _, fb_ref = positivity_and_boundary(grid, reference)
    distance = None
    if not fb.is_empty and not fb_ref.is_empty:
        distance = hausdorff(fb.points, fb_ref.points)
    row = SweepRow(
        p=p,
        sup_dist=field.sup_distance(reference),
        lipschitz=lipschitz_seminorm(grid, field),
        hausdorff=distance,
        converged=report.converged,
        solution=field,
    )
    return row


def p_sweep(spec: ProblemSpec, p_list: Sequence[float], reference: ScalarField,
            options: Optional[PlapOptions] = None) -> List[SweepRow]:
    """
    Solve for each p on the reference's grid and measure the distance to the reference.

    A failing p is recorded in its row and the sweep continues. Each row also
    carries the solved field as `row.solution` (None on failure).
    """
    with ThreadPoolExecutor(max_workers=max(1, settings.runtime.workers)) as pool:
        rows = list(pool.map(lambda p: _sweep_one(spec, reference, float(p), options), p_list))
    for row in rows:
        logger.info(f"p sweep: p={row.p:g} sup={row.sup_dist} lip={row.lipschitz} hausdorff={row.hausdorff}")
    return rows
