"""
Subcommand implementations.

Each command takes the validated RunConfig and an open ArtifactStore,
writes its artifacts and returns the payload of its main report.
"""
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from analysis.free_boundary import (
    analyze as analyze_field,
    default_tol_pos,
    hausdorff,
    null_set_symdiff,
    positivity_and_boundary,
    tol_pos_sensitivity,
)
from data.artifact_store import ArtifactStore
from dpp.engine import OperatorKind, epsilon_study, oscillation, value_iterate
from game.simulator import GameConfig, estimate_value, martingale_audit, simulate
from lattice.domain import GridDomain, build_grid
from lattice.field_io import read_field_csv
from lattice.fields import ScalarField, sample_field, sample_lambda
from models.dto import IterationReport
from models.exceptions import ConfigurationError, UndefinedDistanceError
from models.schema import DppBlock, PlapOptionsBlock, RunConfig
from patch.builder import build_patch
from plap.energy import energy
from plap.solver import PlapOptions, minimize_on_grid, p_sweep

logger = logging.getLogger(__name__)

# (required, optional) blocks per subcommand
BLOCK_USAGE: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    'solve-dpp': (('dpp',), ()),
    'solve-plap': (('plap',), ()),
    'simulate': (('game',), ('dpp',)),
    'patch': (('patch',), ('dpp',)),
    'analyze': (('analyze',), ('dpp', 'plap')),
    'compare': (('dpp',), ('plap', 'patch', 'game', 'analyze')),
    'sweep-eps': (('sweep_eps',), ('dpp',)),
    'sweep-p': (('plap',), ('dpp',)),
}
BLOCKS = ('dpp', 'plap', 'game', 'patch', 'analyze', 'sweep_eps')

PLAP_TOLERANCE = 0.1


def check_blocks(command: str, config: RunConfig) -> None:
    """
    Require the subcommand's blocks and reject the ones it does not use.

    Raises:
        ConfigurationError: naming the missing or unexpected block.
    """
    required, optional = BLOCK_USAGE[command]
    for block in required:
        if getattr(config, block) is None:
            raise ConfigurationError(f"'{command}' needs a '{block}' block", key=block)
    for block in BLOCKS:
        if block not in required and block not in optional and getattr(config, block) is not None:
            raise ConfigurationError(f"'{command}' does not use a '{block}' block", key=block)


def _setup(config: RunConfig) -> Tuple[GridDomain, ScalarField]:
    grid = build_grid(config.problem)
    return grid, sample_field(grid, config.problem.boundary)


def _dpp_block(config: RunConfig) -> DppBlock:
    return config.dpp or DppBlock()


def _run_dpp(config: RunConfig, grid: GridDomain, boundary: ScalarField,
             operator: Optional[str] = None) -> Tuple[ScalarField, IterationReport]:
    block = _dpp_block(config)
    return value_iterate(grid, boundary, operator or block.operator, block.tol, block.max_iter,
                         sweep=block.sweep)


def _require_pay_or_leave(config: RunConfig, command: str) -> None:
    if OperatorKind.coerce(_dpp_block(config).operator) is not OperatorKind.PAY_OR_LEAVE:
        raise ConfigurationError(f"'{command}' needs the pay_or_leave operator", key='dpp.operator')


def _plap_options(p: float, block: Optional[PlapOptionsBlock]) -> PlapOptions:
    block = block or PlapOptionsBlock()
    return PlapOptions(p=p, delta=block.delta, tol_grad=block.tol_grad, max_iter=block.max_iter)


def _p_label(p: float) -> str:
    return f"{p:g}".replace('.', '_')


def _hausdorff_or_none(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    try:
        return hausdorff(a, b)
    except UndefinedDistanceError:
        return None


# ---------------------------------------------------------------- commands

def solve_dpp(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """Value iteration for the configured operator; writes u_eps and report.json."""
    grid, boundary = _setup(config)
    u, report = _run_dpp(config, grid, boundary)
    store.write_field('u_eps', u)
    payload = {
        'iteration': report.to_dict(include_timing=False),
        'oscillation_max': float(np.max(oscillation(grid, u).values)),
        'bounds': {'min': float(u.interior_values.min()), 'max': float(u.interior_values.max())},
        'nodes': {'interior': len(grid.interior_nodes), 'strip': len(grid.strip_nodes)},
    }
    if config.dpp.reference is not None:
        payload['reference_error'] = u.sup_distance(sample_field(grid, config.dpp.reference))
    store.write_report('report.json', payload)
    return payload


def solve_plap(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """Energy minimizer for every p in p_list; writes u_p<p>, fb_p<p> and report.json."""
    grid, boundary = _setup(config)
    lam = sample_lambda(grid, config.problem.lambda0)
    reference = sample_field(grid, config.plap.reference) if config.plap.reference is not None else None
    runs = []
    for p in config.plap.p_list:
        field, report = minimize_on_grid(grid, boundary, lam, _plap_options(p, config.plap.options))
        label = _p_label(p)
        store.write_field(f"u_p{label}", field)
        mask, fb = positivity_and_boundary(grid, field)
        store.write_points(f"fb_p{label}", fb.points, grid.dim)
        entry = {
            'p': p,
            'iteration': report.to_dict(include_timing=False),
            'energy': energy(grid, field, p, lam),
            'extension_energy': energy(grid, boundary, p, lam),
            'fb_points': len(fb),
            'dead_core_fraction': 1.0 - float(mask.sum()) / len(grid.interior_nodes),
        }
        if reference is not None:
            entry['reference_error'] = field.sup_distance(reference)
        runs.append(entry)
    payload = {'runs': runs}
    store.write_report('report.json', payload)
    return payload


def run_simulation(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """Game estimate from the configured start, checked against the DPP value there."""
    _require_pay_or_leave(config, 'simulate')
    grid, boundary = _setup(config)
    u, dpp_report = _run_dpp(config, grid, boundary)
    game = GameConfig.from_block(grid, boundary, config.game, seed)
    estimate = estimate_value(game, u)
    target = float(u.values[game.start_node])
    tolerance = 3.0 * estimate.stderr + 2.0 * grid.epsilon
    payload = dict(estimate.to_dict())
    payload.update({
        'seed': game.seed,
        'dpp_value': target,
        'tolerance': tolerance,
        'within': abs(estimate.mean - target) <= tolerance,
        'dpp': dpp_report.to_dict(include_timing=False),
    })
    if config.game.log_episodes:
        records = simulate(game, u)
        store.write_jsonl('episodes.jsonl', (r.to_dict() for r in records))
        payload['audit'] = martingale_audit(records, u).to_dict()
    store.write_field('u_eps', u)
    store.write_report('estimate.json', payload)
    return payload


def run_patch(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """h -> z -> w -> v and the distance from v to the PayOrLeave solution."""
    _require_pay_or_leave(config, 'patch')
    grid, boundary = _setup(config)
    u, _ = _run_dpp(config, grid, boundary)
    block = _dpp_block(config)
    result = build_patch(grid, boundary, config.patch.theta_tol, config.patch.theta_scales,
                         u_dpp=u, tol=block.tol, max_iter=block.max_iter)
    for name in ('h', 'z', 'w', 'v'):
        store.write_field(name, getattr(result, name))
    store.write_field('lip', result.lip_field)
    store.write_field('u_eps', u)
    payload = result.summary().to_dict()
    payload['iterations'] = [r.to_dict(include_timing=False) for r in result.reports]
    store.write_report('patch.json', payload)
    return payload


def _analysis_field(config: RunConfig, grid: GridDomain,
                    boundary: ScalarField) -> Tuple[ScalarField, float]:
    """The field to analyze and its growth exponent (1 in the limit, p/(p-1) for finite p)."""
    source = config.analyze.field
    if source == 'file':
        return read_field_csv(config.analyze.field_path, grid), 1.0
    if source == 'plap':
        if config.plap is None:
            raise ConfigurationError("field 'plap' needs a 'plap' block", key='plap')
        p = max(config.plap.p_list)
        field, _ = minimize_on_grid(grid, boundary, sample_lambda(grid, config.problem.lambda0),
                                    _plap_options(p, config.plap.options))
        return field, p / (p - 1.0)
    field, _ = _run_dpp(config, grid, boundary)
    return field, 1.0


def run_analysis(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """Free-boundary metrics of a DPP, p-energy or imported field."""
    block = config.analyze
    grid, boundary = _setup(config)
    field, exponent = _analysis_field(config, grid, boundary)
    exponent = block.exponent or exponent
    report, fb = analyze_field(grid, field, block.radii, block.rho, exponent, block.tol_pos)
    store.write_field('field', field)
    store.write_points('fb_points', fb.points, grid.dim)
    payload = report.to_dict()
    payload['exponent'] = exponent
    payload['tol_pos'] = fb.tol_pos
    payload['tol_pos_sensitivity'] = tol_pos_sensitivity(grid, field, block.rho, block.tol_scales)
    store.write_report('analysis.json', payload)
    return payload


def run_compare(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """
    Cross-check the pipelines on one problem.

    Rows (quantity, value, tolerance, within):
        dpp_vs_oracle   sup|u_dpp - reference|, tolerance eps
        plap_vs_oracle  sup|u_p - reference| at the largest p, tolerance 0.1
        plap_vs_dpp     sup|u_p - u_dpp|, tolerance 0.1
        patch_vs_dpp    sup|v - u_dpp|, tolerance eps
        game_vs_dpp     |mean - u_dpp(x0)|, tolerance 3 stderr + 2 eps
        fb_hausdorff    FB of u_dpp vs FB of the reference, tolerance max(eps, 2h)
    """
    grid, boundary = _setup(config)
    eps = grid.epsilon
    u, dpp_report = _run_dpp(config, grid, boundary)
    store.write_field('u_eps', u)
    reference = sample_field(grid, config.dpp.reference) if config.dpp.reference is not None else None
    rows: List[Tuple[str, Optional[float], float]] = []

    if reference is not None:
        rows.append(('dpp_vs_oracle', u.sup_distance(reference), eps))
    if config.plap is not None:
        p = max(config.plap.p_list)
        u_p, _ = minimize_on_grid(grid, boundary, sample_lambda(grid, config.problem.lambda0),
                                  _plap_options(p, config.plap.options))
        store.write_field(f"u_p{_p_label(p)}", u_p)
        if reference is not None:
            rows.append(('plap_vs_oracle', u_p.sup_distance(reference), PLAP_TOLERANCE))
        rows.append(('plap_vs_dpp', u_p.sup_distance(u), PLAP_TOLERANCE))
    if config.patch is not None:
        _require_pay_or_leave(config, 'compare')
        result = build_patch(grid, boundary, config.patch.theta_tol, config.patch.theta_scales,
                             u_dpp=u, tol=config.dpp.tol, max_iter=config.dpp.max_iter)
        store.write_field('v', result.v)
        rows.append(('patch_vs_dpp', result.sup_diff_vs_dpp, eps))
    if config.game is not None:
        _require_pay_or_leave(config, 'compare')
        game = GameConfig.from_block(grid, boundary, config.game, seed)
        estimate = estimate_value(game, u)
        rows.append(('game_vs_dpp', abs(estimate.mean - float(u.values[game.start_node])),
                     3.0 * estimate.stderr + 2.0 * eps))
    if config.analyze is not None and reference is not None:
        tol_pos = config.analyze.tol_pos
        _, fb = positivity_and_boundary(grid, u, tol_pos)
        _, fb_ref = positivity_and_boundary(grid, reference, tol_pos)
        rows.append(('fb_hausdorff', _hausdorff_or_none(fb.points, fb_ref.points), max(eps, 2.0 * grid.h)))

    table = [(name, value, tol, value is not None and value <= tol) for name, value, tol in rows]
    store.write_table('compare.csv', ('quantity', 'value', 'tolerance', 'within'), table)
    payload = {
        'rows': [{'quantity': n, 'value': v, 'tolerance': t, 'within': w} for n, v, t, w in table],
        'dpp': dpp_report.to_dict(include_timing=False),
    }
    for name, value, tol, within in table:
        level = logging.INFO if within else logging.WARNING
        logger.log(level, f"compare {name}: {value} (tolerance {tol:.3g})")
    store.write_report('compare.json', payload)
    return payload


def run_sweep_eps(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """Solutions for several eps at a fixed h/eps ratio and their pairwise distances."""
    block = _dpp_block(config)
    study = epsilon_study(config.problem, config.sweep_eps.eps_list, block.operator,
                          block.tol, block.max_iter, config.sweep_eps.reference)
    errors = study.reference_errors or [None] * len(study.eps)
    store.write_table('sweep_eps.csv', ('eps', 'h', 'reference_error'),
                      zip(study.eps, study.h, errors))
    payload = study.to_dict()
    if study.reference_errors:
        order = np.argsort(study.eps)[::-1]
        ordered = [study.reference_errors[i] for i in order]
        payload['error_decreasing'] = all(b < a for a, b in zip(ordered, ordered[1:]))
    store.write_report('sweep_eps.json', payload)
    return payload


def run_sweep_p(config: RunConfig, store: ArtifactStore, seed: Optional[int] = None) -> dict:
    """
    p-energy minimizers for increasing p against a limit field.

    The limit is the closed-form plap.reference when given, otherwise the
    PayOrLeave DPP solution.
    """
    grid, boundary = _setup(config)
    if config.plap.reference is not None:
        reference = sample_field(grid, config.plap.reference)
        source = 'oracle'
    else:
        _require_pay_or_leave(config, 'sweep-p')
        reference, _ = _run_dpp(config, grid, boundary)
        source = 'dpp'
    options = config.plap.options
    base = PlapOptions(p=2.0, delta=options.delta, tol_grad=options.tol_grad, max_iter=options.max_iter)
    rows = p_sweep(config.problem, config.plap.p_list, reference, base)

    tol = default_tol_pos(reference)
    entries = []
    for row in rows:
        entry = row.to_dict()
        if row.solution is not None:
            store.write_field(f"u_p{_p_label(row.p)}", row.solution)
            entry['null_set_symdiff'] = null_set_symdiff(row.solution, reference, tol)
        entries.append(entry)
    store.write_table('sweep_p.csv', ('p', 'sup_dist', 'lipschitz', 'hausdorff', 'converged'),
                      [(r.p, r.sup_dist, r.lipschitz, r.hausdorff, r.converged) for r in rows])
    sups = [r.sup_dist for r in rows]
    payload = {
        'reference': source,
        'rows': entries,
        'sup_decreasing': None not in sups and all(b < a for a, b in zip(sups, sups[1:])),
    }
    store.write_report('sweep_p.json', payload)
    return payload


COMMANDS: Dict[str, Callable[[RunConfig, ArtifactStore, Optional[int]], dict]] = {
    'solve-dpp': solve_dpp,
    'solve-plap': solve_plap,
    'simulate': run_simulation,
    'patch': run_patch,
    'analyze': run_analysis,
    'compare': run_compare,
    'sweep-eps': run_sweep_eps,
    'sweep-p': run_sweep_p,
}
