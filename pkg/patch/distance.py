"""
Shortest paths on lattice sub-graphs.

The path graph of a node set joins nodes one lattice step apart, diagonals
included (2 neighbors in 1D, 8 in 2D), with Euclidean edge lengths.
"""
import heapq
import itertools
import logging
from typing import Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from lattice.domain import GridDomain
from models.exceptions import ContractViolation

logger = logging.getLogger(__name__)


def path_steps(dim: int) -> np.ndarray:
    """Integer steps {-1, 0, 1}^dim without the zero step."""
    steps = np.array([s for s in itertools.product((-1, 0, 1), repeat=dim) if any(s)], dtype=np.int64)
    return steps


def path_graph(grid: GridDomain, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Adjacency of the path graph on `nodes`.

    Returns:
        (neighbors, weights): neighbors[i, s] is the local index of the node one
        step `s` away from nodes[i] (-1 when it is not in the set); weights[s]
        is the Euclidean length of step s.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    local = np.full(grid.node_count, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    steps = path_steps(grid.dim)
    columns = []
    for step in steps:
        target = grid.locate(grid.lattice[nodes] + step)
        columns.append(np.where(target >= 0, local[np.maximum(target, 0)], -1))
    neighbors = np.stack(columns, axis=1) if len(nodes) else np.empty((0, len(steps)), dtype=np.int64)
    weights = grid.h * np.linalg.norm(steps, axis=1)
    return neighbors, weights


def multi_source_dijkstra(neighbors: np.ndarray, weights: np.ndarray,
                          sources: Sequence[int], potentials: Sequence[float]) -> np.ndarray:
    """
    D(x) = min over sources s of (potential(s) + d(s, x)).

    Potentials may be negative; edge weights must not be. Unreachable nodes
    get +inf.
    """
    if len(sources) != len(potentials):
        raise ContractViolation("one potential per source is required")
    if np.any(np.asarray(weights) < 0):
        raise ContractViolation("edge weights must be nonnegative")
    n = len(neighbors)
    dist = [float('inf')] * n
    heap = []
    for s, p in zip(sources, potentials):
        s, p = int(s), float(p)
        if p < dist[s]:
            dist[s] = p
            heap.append((p, s))
    heapq.heapify(heap)
    adjacency = neighbors.tolist()
    lengths = [float(w) for w in weights]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        for j, w in zip(adjacency[i], lengths):
            if j < 0:
                continue
            nd = d + w
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return np.array(dist)


def shortest_paths(neighbors: np.ndarray, weights: np.ndarray, source: int) -> np.ndarray:
    """Single-source distances."""
    return multi_source_dijkstra(neighbors, weights, [source], [0.0])


def as_sparse(neighbors: np.ndarray, weights: np.ndarray) -> csr_matrix:
    """The path graph as a sparse weighted adjacency matrix."""
    n = len(neighbors)
    rows, cols = np.nonzero(neighbors >= 0)
    return csr_matrix((weights[cols], (rows, neighbors[rows, cols])), shape=(n, n))
