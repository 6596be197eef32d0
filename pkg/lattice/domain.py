"""
Lattice discretization of a domain, its boundary strip and the closed
epsilon-ball neighborhoods used by every discrete operator.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from models.exceptions import ConfigurationError, ContractViolation, DomainTooSmallError
from models.schema import BallDomain, IntervalDomain, ProblemSpec, RectangleDomain

logger = logging.getLogger(__name__)

# Relative fuzz for geometric membership tests, in units of h.
GEOMETRY_FUZZ = 1e-9


def steps_per_epsilon(h: float, epsilon: float) -> int:
    """Return k with epsilon == k*h, or raise ConfigurationError naming epsilon."""
    if h <= 0:
        raise ConfigurationError(f"h must be positive, got {h}", key='h')
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}", key='epsilon')
    k = int(round(epsilon / h))
    if k < 1 or abs(k * h - epsilon) > 1e-9 * epsilon:
        raise ConfigurationError(
            f"epsilon={epsilon} is not a positive integer multiple of h={h}", key='epsilon'
        )
    return k


def _bounds(shape) -> np.ndarray:
    """Axis-aligned bounding box as a (dim, 2) array."""
    if isinstance(shape, IntervalDomain):
        return np.array([[shape.a, shape.b]])
    if isinstance(shape, RectangleDomain):
        return np.array([[shape.a1, shape.b1], [shape.a2, shape.b2]])
    center = np.asarray(shape.center, dtype=float)
    return np.stack([center - shape.radius, center + shape.radius], axis=1)


def signed_distance(shape, coords: np.ndarray) -> np.ndarray:
    """Negative inside, distance to the boundary outside (exact outside the shape)."""
    if isinstance(shape, BallDomain):
        center = np.asarray(shape.center, dtype=float)
        return np.linalg.norm(coords - center, axis=1) - shape.radius
    box = _bounds(shape)
    below = box[:, 0] - coords
    above = coords - box[:, 1]
    gap = np.maximum(below, above)
    outside = np.linalg.norm(np.maximum(gap, 0.0), axis=1)
    inside = np.minimum(np.max(gap, axis=1), 0.0)
    return outside + inside


def ball_offsets(k: int, dim: int) -> np.ndarray:
    """Integer offsets o with |o| <= k, lexicographically ordered."""
    axis = np.arange(-k, k + 1)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing='ij'), axis=-1).reshape(-1, dim)
    keep = np.sum(mesh ** 2, axis=1) <= k * k
    return mesh[keep]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Immutable lattice over interior and strip nodes.

    Node indices follow lexicographic order of the lattice coordinates.
    `neighbor_table[r]` lists, sorted by node index, the nodes of the closed
    lattice ball of radius epsilon around the interior node `interior_nodes[r]`.
    """
    dim: int
    h: float
    epsilon: float
    k: int
    shape: object
    lattice: np.ndarray
    coords: np.ndarray
    interior_nodes: np.ndarray
    strip_nodes: np.ndarray
    offsets: np.ndarray
    neighbor_table: np.ndarray
    origin: np.ndarray
    index_grid: np.ndarray
    is_interior: np.ndarray = field(repr=False)
    interior_row: np.ndarray = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.coords)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def locate(self, lattice_points: np.ndarray) -> np.ndarray:
        """Node indices for integer lattice points, -1 where no node exists."""
        pts = np.atleast_2d(np.asarray(lattice_points, dtype=np.int64))
        rel = pts - self.origin
        shape = np.array(self.index_grid.shape)
        valid = np.all((rel >= 0) & (rel < shape), axis=1)
        out = np.full(len(pts), -1, dtype=np.int64)
        if np.any(valid):
            out[valid] = self.index_grid[tuple(rel[valid].T)]
        return out

    def node_at(self, point: Sequence[float]) -> int:
        """Index of the node at a physical point (must be a lattice point of the grid)."""
        lat = np.rint(np.asarray(point, dtype=float) / self.h).astype(np.int64)
        if lat.shape != (self.dim,) or np.max(np.abs(lat * self.h - np.asarray(point))) > 1e-9 * max(self.h, 1.0):
            raise ContractViolation(f"point {list(point)} is not a lattice point of spacing {self.h}")
        idx = int(self.locate(lat[None, :])[0])
        if idx < 0:
            raise ContractViolation(f"point {list(point)} is not a node of this grid")
        return idx

    def ball_nodes(self, center_node: int, radius: float) -> np.ndarray:
        """All nodes within the closed lattice ball of `radius` around a node, sorted."""
        k = int(np.floor(radius / self.h + GEOMETRY_FUZZ))
        pts = self.lattice[center_node] + ball_offsets(k, self.dim)
        idx = self.locate(pts)
        return np.sort(idx[idx >= 0])


def build_grid(spec: ProblemSpec) -> GridDomain:
    """
    Build the lattice for a problem.

    Args:
        spec: Problem specification (shape, h, epsilon).

    Returns:
        GridDomain with lexicographically ordered nodes.

    Raises:
        ConfigurationError: epsilon is not an integer multiple of h.
        DomainTooSmallError: no lattice point lies strictly inside the domain.
    """
    h, eps = spec.h, spec.epsilon
    k = steps_per_epsilon(h, eps)
    shape = spec.domain
    dim = shape.dim
    tau = GEOMETRY_FUZZ * h

    box = _bounds(shape)
    lo = np.floor((box[:, 0] - eps) / h).astype(np.int64) - 1
    hi = np.ceil((box[:, 1] + eps) / h).astype(np.int64) + 1
    axes = [np.arange(lo[d], hi[d] + 1) for d in range(dim)]
    lattice_all = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, dim)
    coords_all = lattice_all * h

    dist = signed_distance(shape, coords_all)
    inside = dist < -tau
    strip = (~inside) & (dist < eps - tau)
    keep = inside | strip

    if not np.any(inside):
        raise DomainTooSmallError(
            f"no lattice point of spacing {h} lies strictly inside the {shape.kind}", key='h'
        )

    lattice = lattice_all[keep]
    coords = coords_all[keep]
    is_interior = inside[keep]
    n = len(lattice)

    grid_shape = tuple(int(x) for x in (hi - lo + 1))
    index_grid = np.full(grid_shape, -1, dtype=np.int64)
    index_grid[tuple((lattice - lo).T)] = np.arange(n)

    interior_nodes = np.flatnonzero(is_interior)
    strip_nodes = np.flatnonzero(~is_interior)
    interior_row = np.full(n, -1, dtype=np.int64)
    interior_row[interior_nodes] = np.arange(len(interior_nodes))

    offsets = ball_offsets(k, dim)
    targets = lattice[interior_nodes][:, None, :] + offsets[None, :, :]
    neighbor_table = index_grid[tuple(np.moveaxis(targets - lo, -1, 0))]
    if np.any(neighbor_table < 0):
        raise RuntimeError("neighbor of an interior node fell outside the strip")
    neighbor_table = np.sort(neighbor_table, axis=1)

    grid = GridDomain(
        dim=dim, h=h, epsilon=eps, k=k, shape=shape,
        lattice=lattice, coords=coords,
        interior_nodes=interior_nodes, strip_nodes=strip_nodes,
        offsets=offsets, neighbor_table=neighbor_table,
        origin=lo, index_grid=index_grid,
        is_interior=is_interior, interior_row=interior_row,
    )
    logger.info(
        f"Built {dim}D {shape.kind} grid: {len(interior_nodes)} interior, "
        f"{len(strip_nodes)} strip nodes, {len(offsets)} neighbors per node"
    )
    return grid


def ball_neighbors(grid: GridDomain, node: int) -> List[int]:
    """
    Nodes y with |y - x| <= epsilon for an interior node x, sorted by index.

    Raises:
        ContractViolation: the node is not an interior node.
    """
    if not 0 <= node < grid.node_count or not grid.is_interior[node]:
        raise ContractViolation(f"node {node} is not an interior node")
    return grid.neighbor_table[grid.interior_row[node]].tolist()


def require_same_grid(grid: GridDomain, other: Optional[GridDomain]) -> None:
    if other is not None and other is not grid:
        raise ContractViolation("fields live on different grids")
