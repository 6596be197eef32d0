"""
Positivity sets, free boundaries and the quantitative geometry measured on them.

The free boundary is kept as a point cloud: interior nodes on either side
of {u > tol_pos} that have a face neighbor on the other side. Ball queries
use closed lattice balls; set distances are brute force.
"""
import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from config.settings import settings
from lattice.domain import GEOMETRY_FUZZ, GridDomain, ball_offsets
from lattice.fields import ScalarField
from models.dto import AnalysisReport, FreeBoundary
from models.exceptions import ContractViolation, UndefinedDistanceError

logger = logging.getLogger(__name__)


class NondegeneracyResult(NamedTuple):
    min_ratio: Optional[float]
    per_radius: Dict[float, float]
    notes: List[str]


def default_tol_pos(field: ScalarField) -> float:
    """tol_pos = scale * (max|u| + 1)."""
    return settings.analysis.tol_pos_scale * (float(np.max(np.abs(field.values))) + 1.0)


def face_neighbors(grid: GridDomain) -> np.ndarray:
    """(n_interior, 2*dim) interior node indices of the axis neighbors, -1 where absent."""
    lattice = grid.lattice[grid.interior_nodes]
    steps = np.concatenate([np.eye(grid.dim, dtype=np.int64), -np.eye(grid.dim, dtype=np.int64)])
    table = np.stack([grid.locate(lattice + s) for s in steps], axis=1)
    interior = np.where(table >= 0, grid.is_interior[np.maximum(table, 0)], False)
    return np.where(interior, table, -1)


def positivity_and_boundary(grid: GridDomain, field: ScalarField,
                            tol_pos: Optional[float] = None) -> Tuple[np.ndarray, FreeBoundary]:
    """
    Positivity mask over the nodes and the free-boundary point cloud.

    Returns:
        (mask, FreeBoundary); mask[i] is True for interior nodes with u > tol_pos.
    """
    tol_pos = default_tol_pos(field) if tol_pos is None else tol_pos
    if tol_pos < 0:
        raise ContractViolation(f"tol_pos must be >= 0, got {tol_pos}")
    mask = grid.is_interior & (field.values > tol_pos)

    table = face_neighbors(grid)
    own = mask[grid.interior_nodes]
    present = table >= 0
    other = np.where(present, mask[np.maximum(table, 0)], own[:, None])
    crossing = np.any(present & (other != own[:, None]), axis=1)
    nodes = grid.interior_nodes[crossing]
    fb = FreeBoundary(
        nodes=nodes,
        points=grid.coords[nodes],
        zero_side=~mask[nodes],
        tol_pos=tol_pos,
    )
    logger.debug(f"positivity set: {int(mask.sum())} nodes, free boundary: {len(fb)} points")
    return mask, fb


def _directed_min(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest target, in chunks."""
    chunk = settings.analysis.distance_chunk
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        block = cdist(points[start:start + chunk], targets)
        out[start:start + chunk] = block.min(axis=1)
    return out


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def hausdorff(a, b) -> float:
    """
    Euclidean Hausdorff distance between two finite point sets.

    Raises:
        UndefinedDistanceError: either set is empty.
    """
    a, b = _as_points(a), _as_points(b)
    if len(a) == 0 or len(b) == 0:
        raise UndefinedDistanceError("Hausdorff distance of an empty set is undefined")
    return float(max(_directed_min(a, b).max(), _directed_min(b, a).max()))


def _ball_values(grid: GridDomain, nodes: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Node indices of the closed lattice balls around `nodes` and a completeness flag per ball."""
    k = int(np.floor(radius / grid.h + GEOMETRY_FUZZ))
    offsets = ball_offsets(k, grid.dim)
    pts = grid.lattice[nodes][:, None, :] + offsets[None, :, :]
    idx = grid.locate(pts.reshape(-1, grid.dim)).reshape(len(nodes), len(offsets))
    return idx, np.all(idx >= 0, axis=1)


def nondegeneracy_check(grid: GridDomain, field: ScalarField, radii: Sequence[float],
                        exponent: float, tol_pos: Optional[float] = None) -> NondegeneracyResult:
    """
    min over free-boundary points x0 and radii r of sup_{B_r(x0)} u / r^exponent.

    Balls reaching beyond the node set are skipped and noted.
    """
    _, fb = positivity_and_boundary(grid, field, tol_pos)
    notes: List[str] = []
    per_radius: Dict[float, float] = {}
    if fb.is_empty:
        return NondegeneracyResult(None, per_radius, ['free boundary empty'])
    for r in radii:
        idx, complete = _ball_values(grid, fb.nodes, r)
        if not np.all(complete):
            notes.append(f"r={r:g}: {int((~complete).sum())} of {len(fb)} balls leave the grid, skipped")
        if not np.any(complete):
            continue
        sup = field.values[idx[complete]].max(axis=1)
        per_radius[float(r)] = float(np.min(sup / r ** exponent))
    for note in notes:
        logger.warning(f"nondegeneracy: {note}")
    min_ratio = min(per_radius.values()) if per_radius else None
    return NondegeneracyResult(min_ratio, per_radius, notes)


def density_check(grid: GridDomain, field: ScalarField, rho: float,
                  tol_pos: Optional[float] = None, nodes: Optional[np.ndarray] = None) -> float:
    """
    min over query points of the fraction of nodes in B_rho(x0) with u > tol_pos.

    Query points default to the free boundary; an empty query set gives 1.
    """
    tol_pos = default_tol_pos(field) if tol_pos is None else tol_pos
    if nodes is None:
        _, fb = positivity_and_boundary(grid, field, tol_pos)
        nodes = fb.nodes
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        return 1.0
    idx, _ = _ball_values(grid, nodes, rho)
    present = idx >= 0
    positive = present & (field.values[np.maximum(idx, 0)] > tol_pos)
    ratios = positive.sum(axis=1) / present.sum(axis=1)
    return float(ratios.min())


def porosity_estimate(grid: GridDomain, field: ScalarField, radii: Sequence[float],
                      tol_pos: Optional[float] = None) -> float:
    """
    Empirical porosity constant zeta.

    For each free-boundary point x and radius r, the largest rho with a ball
    B_rho(y) inside B_r(x) that misses the free boundary, over r; zeta is the
    minimum over all samples. Centers y range over interior nodes. An empty
    free boundary gives 1.
    """
    _, fb = positivity_and_boundary(grid, field, tol_pos)
    if fb.is_empty:
        return 1.0
    r_max = max(radii)
    idx_max, _ = _ball_values(grid, fb.nodes, r_max)
    candidates = np.unique(idx_max[idx_max >= 0])
    dist_fb = np.full(grid.node_count, np.inf)
    dist_fb[candidates] = _directed_min(grid.coords[candidates], fb.points)

    zeta = 1.0
    for r in radii:
        k = int(np.floor(r / grid.h + GEOMETRY_FUZZ))
        offsets = ball_offsets(k, grid.dim)
        reach = r - grid.h * np.linalg.norm(offsets, axis=1)
        pts = grid.lattice[fb.nodes][:, None, :] + offsets[None, :, :]
        idx = grid.locate(pts.reshape(-1, grid.dim)).reshape(len(fb), len(offsets))
        inside = (idx >= 0) & grid.is_interior[np.maximum(idx, 0)]
        room = np.where(inside, np.minimum(reach[None, :], dist_fb[np.maximum(idx, 0)]), 0.0)
        zeta = min(zeta, float(np.min(room.max(axis=1))) / r)
    if zeta <= grid.h / r_max:
        logger.warning(f"porosity constant {zeta:.3g} is below lattice resolution")
    return zeta


def pointwise_lipschitz(grid: GridDomain, field: ScalarField) -> np.ndarray:
    """Per interior node: max over y in N(x), y != x, of |u(y) - u(x)| / |y - x|."""
    table = grid.neighbor_table
    lattice = grid.lattice[grid.interior_nodes]
    dist = grid.h * np.linalg.norm(grid.lattice[table] - lattice[:, None, :], axis=2)
    jumps = np.abs(field.values[table] - field.interior_values[:, None])
    quotients = np.where(dist > 0, jumps / np.where(dist > 0, dist, 1.0), 0.0)
    return quotients.max(axis=1)


def lipschitz_seminorm(grid: GridDomain, field: ScalarField) -> float:
    """max over neighbor pairs of |u(y) - u(x)| / |y - x|."""
    values = pointwise_lipschitz(grid, field)
    return float(values.max()) if values.size else 0.0


def _distance_to_zero_side(grid: GridDomain, field: ScalarField,
                           tol_pos: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    mask, fb = positivity_and_boundary(grid, field, tol_pos)
    zero = fb.zero_side_points
    positive = np.flatnonzero(mask)
    if len(zero) == 0 or len(positive) == 0:
        return positive, np.empty(0)
    return positive, _directed_min(grid.coords[positive], zero)


def growth_envelope(grid: GridDomain, field: ScalarField,
                    tol_pos: Optional[float] = None) -> Tuple[Optional[float], Optional[float]]:
    """
    (c1, c2) = (min, max) over positivity nodes of u(x) / dist(x, FB).

    Distances are taken to the zero-side free-boundary points.
    """
    positive, dist = _distance_to_zero_side(grid, field, tol_pos)
    if dist.size == 0:
        logger.warning("growth envelope undefined: free boundary empty")
        return None, None
    ratios = field.values[positive] / dist
    return float(ratios.min()), float(ratios.max())


def sharp_growth_constant(grid: GridDomain, field: ScalarField, exponent: float,
                          tol_pos: Optional[float] = None) -> Optional[float]:
    """Measured constant c in u(x) >= c * dist(x, FB)^exponent over positivity nodes."""
    positive, dist = _distance_to_zero_side(grid, field, tol_pos)
    if dist.size == 0:
        return None
    return float(np.min(field.values[positive] / dist ** exponent))


def null_set_symdiff(field_a: ScalarField, field_b: ScalarField, tol: float) -> float:
    """Fraction of interior nodes where exactly one of |A|, |B| is <= tol."""
    if field_a.grid is not field_b.grid:
        raise ContractViolation("fields live on different grids")
    a = np.abs(field_a.interior_values) <= tol
    b = np.abs(field_b.interior_values) <= tol
    return float(np.count_nonzero(a ^ b)) / len(a)


def tol_pos_sensitivity(grid: GridDomain, field: ScalarField, rho: float,
                        scales: Sequence[float]) -> Dict[str, Dict[str, float]]:
    """Free-boundary size and density ratio under scaled positivity thresholds."""
    base = default_tol_pos(field)
    out: Dict[str, Dict[str, float]] = {}
    for scale in scales:
        tol = base * scale
        _, fb = positivity_and_boundary(grid, field, tol)
        out[f"{scale:g}"] = {
            'tol_pos': tol,
            'fb_points': float(len(fb)),
            'density_min': density_check(grid, field, rho, tol, fb.nodes),
        }
    return out


def analyze(grid: GridDomain, field: ScalarField, radii: Sequence[float], rho: float,
            exponent: float = 1.0, tol_pos: Optional[float] = None,
            reference_points: Optional[np.ndarray] = None) -> Tuple[AnalysisReport, FreeBoundary]:
    """Run every free-boundary measurement on one field."""
    _, fb = positivity_and_boundary(grid, field, tol_pos)
    report = AnalysisReport(fb_points=len(fb), lipschitz=lipschitz_seminorm(grid, field))
    if fb.is_empty:
        report.notes.append('free boundary empty; geometric metrics not applicable')
        report.density_min = 1.0
        report.porosity_zeta = 1.0
        return report, fb

    nondeg = nondegeneracy_check(grid, field, radii, exponent, fb.tol_pos)
    report.nondeg_min_ratio = nondeg.min_ratio
    report.notes.extend(nondeg.notes)
    report.density_min = density_check(grid, field, rho, fb.tol_pos, fb.nodes)
    report.porosity_zeta = porosity_estimate(grid, field, radii, fb.tol_pos)
    if report.porosity_zeta <= grid.h / max(radii):
        report.notes.append('porosity constant below lattice resolution')
    report.growth_c1, report.growth_c2 = growth_envelope(grid, field, fb.tol_pos)
    report.sharp_growth = sharp_growth_constant(grid, field, exponent, fb.tol_pos)
    if reference_points is not None and len(reference_points):
        report.hausdorff = hausdorff(fb.points, reference_points)
    logger.info(f"analysis: {len(fb)} FB points, nondeg={report.nondeg_min_ratio}, "
                f"density={report.density_min}, zeta={report.porosity_zeta}")
    return report, fb
