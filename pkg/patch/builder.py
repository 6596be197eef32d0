"""
Patched-function construction for the gradient-constraint problem.

Starting from the infinity-harmonic extension h of the boundary datum, the
set V where h is flatter than slope 1 is cut into face-connected components.
On each component h is replaced by the largest 1-Lipschitz function below
its boundary values (z), and z is then re-solved as an infinity-harmonic
function wherever it is negative (w). The result v is z on {z >= 0} and w
on {z < 0}.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from analysis.free_boundary import pointwise_lipschitz
from config.settings import settings
from dpp.engine import OperatorKind, value_iterate
from lattice.domain import GridDomain
from lattice.fields import ScalarField
from models.dto import IterationReport, PatchSummary
from models.exceptions import ContractViolation
from patch.distance import multi_source_dijkstra, path_graph, path_steps

logger = logging.getLogger(__name__)

DEFAULT_SCALES = (0.5, 1.0, 2.0)


@dataclass(frozen=True, eq=False)
class PatchResult:
    """Every stage of the construction.

    components labels V's face-connected components 1..n per node (0 off V).
    w equals z outside {z < 0}.
    """
    z: ScalarField
    w: ScalarField
    v: ScalarField
    h: Optional[ScalarField] = None
    lip_field: Optional[ScalarField] = None
    V_mask: Optional[np.ndarray] = None
    components: Optional[np.ndarray] = None
    n_components: int = 0
    theta_tol: float = 0.0
    V_fraction: float = 0.0
    sup_diff_vs_dpp: Optional[float] = None
    sensitivity: Optional[Dict[str, float]] = None
    reports: Tuple[IterationReport, ...] = ()

    def summary(self) -> PatchSummary:
        return PatchSummary(
            n_components=self.n_components,
            V_fraction=self.V_fraction,
            theta_tol=self.theta_tol,
            sup_diff_vs_dpp=self.sup_diff_vs_dpp,
            sensitivity=dict(self.sensitivity or {}),
        )


def _max_quotient(grid: GridDomain, values: np.ndarray, nodes: np.ndarray,
                  allowed: np.ndarray) -> np.ndarray:
    """Per node: max |u(y) - u(x)| / |y - x| over allowed y in the closed eps-ball, y != x."""
    if len(nodes) == 0:
        return np.empty(0)
    offsets = grid.offsets
    moving = np.any(offsets != 0, axis=1)
    offsets = offsets[moving]
    pts = grid.lattice[nodes][:, None, :] + offsets[None, :, :]
    idx = grid.locate(pts.reshape(-1, grid.dim)).reshape(len(nodes), len(offsets))
    present = idx >= 0
    safe = np.maximum(idx, 0)
    present &= allowed[safe]
    lengths = grid.h * np.linalg.norm(offsets, axis=1)
    quotients = np.abs(values[safe] - values[nodes][:, None]) / lengths[None, :]
    quotients = np.where(present, quotients, 0.0)
    return quotients.max(axis=1)


def solve_inf_harmonic(grid: GridDomain, boundary: ScalarField,
                       mask: Optional[np.ndarray] = None,
                       tol: Optional[float] = None,
                       max_iter: Optional[int] = None) -> Tuple[ScalarField, IterationReport]:
    """
    Infinity-harmonic DPP fixed point on the whole grid or on a masked sub-domain.

    With a mask, every node outside it keeps its value in `boundary`, so the
    nodes reached from the mask form a frozen ring. An empty mask returns the
    boundary field unchanged.
    """
    if mask is not None and not np.any(mask):
        logger.debug("infinity-harmonic solve on an empty set; nothing to do")
        return boundary, IterationReport(iterations=0, final_residual=0.0, monotone=True)
    return value_iterate(grid, boundary, OperatorKind.INFINITY_HARMONIC, tol, max_iter, mask=mask)


def pointwise_lip(grid: GridDomain, field: ScalarField) -> ScalarField:
    """
    L(x) = max over y in N(x), y != x, of |u(y) - u(x)| / |y - x|.

    Strip nodes use the neighbors that exist on the grid.
    """
    values = np.zeros(grid.node_count)
    values[grid.interior_nodes] = pointwise_lipschitz(grid, field)
    everywhere = np.ones(grid.node_count, dtype=bool)
    values[grid.strip_nodes] = _max_quotient(grid, field.values, grid.strip_nodes, everywhere)
    return ScalarField(grid, values)


def boundary_lipschitz(grid: GridDomain, field: ScalarField) -> float:
    """Lipschitz constant of the strip data over strip pairs within eps."""
    quotients = _max_quotient(grid, field.values, grid.strip_nodes, ~grid.is_interior)
    return float(quotients.max()) if quotients.size else 0.0


def default_theta_tol(grid: GridDomain, h: ScalarField) -> float:
    """theta_tol = 2 * grid spacing * Lip(g), g being the strip values of h."""
    return 2.0 * grid.h * boundary_lipschitz(grid, h)


def flat_set(grid: GridDomain, lip_field: ScalarField, theta_tol: float) -> np.ndarray:
    """V = {interior x : L(x) < 1 - theta_tol} as a node mask."""
    return grid.is_interior & (lip_field.values < 1.0 - theta_tol)


def label_components(grid: GridDomain, mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """Face-connected components of a node set; labels per node, 0 outside."""
    image = np.zeros(grid.index_grid.shape, dtype=bool)
    members = np.flatnonzero(mask)
    image[tuple((grid.lattice[members] - grid.origin).T)] = True
    structure = ndimage.generate_binary_structure(grid.dim, 1)
    labeled, count = ndimage.label(image, structure=structure)
    labels = labeled[tuple((grid.lattice - grid.origin).T)]
    return np.where(mask, labels, 0), int(count)


def _component_ring(grid: GridDomain, members: np.ndarray) -> np.ndarray:
    """Lattice boundary of a component: nodes one path step away that are not in it."""
    inside = np.zeros(grid.node_count, dtype=bool)
    inside[members] = True
    ring = []
    for step in path_steps(grid.dim):
        target = grid.locate(grid.lattice[members] + step)
        target = target[target >= 0]
        ring.append(target[~inside[target]])
    return np.unique(np.concatenate(ring)) if ring else np.empty(0, dtype=np.int64)


def _patch_component(grid: GridDomain, h: ScalarField, members: np.ndarray,
                     label: int) -> np.ndarray:
    """max over ring nodes y of h(y) - d_U(x, y) for the component's nodes."""
    ring = _component_ring(grid, members)
    if len(ring) == 0:
        raise RuntimeError(f"component {label} has an empty lattice boundary")
    nodes = np.concatenate([members, ring])
    neighbors, weights = path_graph(grid, nodes)
    sources = np.arange(len(members), len(nodes))
    potential = multi_source_dijkstra(neighbors, weights, sources, -h.values[ring])
    logger.debug(f"component {label}: {len(members)} nodes, {len(ring)} boundary nodes")
    return -potential[: len(members)]


def patch_flat_set(grid: GridDomain, h: ScalarField, lip_field: ScalarField,
                   theta_tol: Optional[float] = None):
    """z together with V, its component labels, their count and the theta_tol used."""
    if h.grid is not grid or lip_field.grid is not grid:
        raise ContractViolation("fields live on different grids")
    theta_tol = default_theta_tol(grid, h) if theta_tol is None else float(theta_tol)
    V = flat_set(grid, lip_field, theta_tol)
    labels, count = label_components(grid, V)
    z = h.values.copy()
    groups = [np.flatnonzero(labels == label) for label in range(1, count + 1)]
    with ThreadPoolExecutor(max_workers=max(1, settings.runtime.workers)) as pool:
        patched = list(pool.map(lambda item: _patch_component(grid, h, item[1], item[0] + 1),
                                enumerate(groups)))
    for members, values in zip(groups, patched):
        z[members] = values
    logger.info(f"patched {count} component(s) covering {int(V.sum())} of "
                f"{len(grid.interior_nodes)} interior nodes (theta_tol={theta_tol:.3g})")
    return ScalarField(grid, z), V, labels, count, theta_tol


def build_patched_z(grid: GridDomain, h: ScalarField, lip_field: ScalarField,
                    theta_tol: Optional[float] = None) -> ScalarField:
    """
    z = h off V; on each component U of V, z(x) = max over boundary nodes y of
    U of h(y) - d_U(x, y), with d_U the path-graph distance inside U and its
    lattice boundary.
    """
    z, *_ = patch_flat_set(grid, h, lip_field, theta_tol)
    return z


def build_v(grid: GridDomain, z: ScalarField, tol: Optional[float] = None,
            max_iter: Optional[int] = None) -> PatchResult:
    """w = infinity-harmonic on {z < 0} with boundary z; v = z on {z >= 0}, w on {z < 0}."""
    if z.grid is not grid:
        raise ContractViolation("z does not live on this grid")
    negative = grid.is_interior & (z.values < 0)
    w, report = solve_inf_harmonic(grid, z, mask=negative, tol=tol, max_iter=max_iter)
    v = ScalarField(grid, np.where(z.values >= 0, z.values, w.values))
    logger.info(f"w solved on {int(negative.sum())} node(s) where z < 0")
    return PatchResult(z=z, w=w, v=v, reports=(report,))


def compare_to_dpp(v: ScalarField, u_dpp: ScalarField) -> float:
    """sup over interior nodes of |v - u_dpp|."""
    return v.sup_distance(u_dpp)


def theta_sensitivity(grid: GridDomain, h: ScalarField, lip_field: ScalarField,
                      scales: Sequence[float] = DEFAULT_SCALES,
                      theta_tol: Optional[float] = None) -> Dict[str, float]:
    """V_fraction for each multiple of theta_tol, keyed by the multiple."""
    base = default_theta_tol(grid, h) if theta_tol is None else theta_tol
    interior = max(len(grid.interior_nodes), 1)
    return {f"{s:g}": float(flat_set(grid, lip_field, base * s).sum()) / interior for s in scales}


def build_patch(grid: GridDomain, boundary: ScalarField, theta_tol: Optional[float] = None,
                scales: Sequence[float] = DEFAULT_SCALES,
                u_dpp: Optional[ScalarField] = None,
                tol: Optional[float] = None, max_iter: Optional[int] = None) -> PatchResult:
    """
    Run h -> L -> V -> z -> w -> v for a boundary datum.

    Args:
        grid: Grid.
        boundary: Field carrying the datum on the strip.
        theta_tol: Threshold buffer (default 2 * spacing * Lip of the datum).
        scales: theta_tol multiples for the sensitivity report.
        u_dpp: Optional PayOrLeave solution to compare v with.
        tol, max_iter: Infinity-harmonic iteration controls.
    """
    h, h_report = solve_inf_harmonic(grid, boundary, tol=tol, max_iter=max_iter)
    lip = pointwise_lip(grid, h)
    z, V, labels, count, theta = patch_flat_set(grid, h, lip, theta_tol)
    result = build_v(grid, z, tol=tol, max_iter=max_iter)
    sup_diff = compare_to_dpp(result.v, u_dpp) if u_dpp is not None else None
    result = replace(
        result,
        h=h,
        lip_field=lip,
        V_mask=V,
        components=labels,
        n_components=count,
        theta_tol=theta,
        V_fraction=float(V.sum()) / max(len(grid.interior_nodes), 1),
        sup_diff_vs_dpp=sup_diff,
        sensitivity=theta_sensitivity(grid, h, lip, scales, theta),
        reports=(h_report,) + result.reports,
    )
    logger.info(f"patch: {result.summary()}")
    return result
