"""Neighbour generation (k-hop and random walk) and the pruned adjacency.

The pruned adjacency keeps an edge (i, j) of the original graph iff j was
sampled as a neighbour of i, and is then symmetrised by union.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConfigError
from .graph import Graph
from .rng import MASK64

__all__ = [
    "SamplerConfig",
    "SampledAdjacency",
    "khop_neighbors",
    "rw_neighbors",
    "build_sampled_adjacency",
]


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "rw"
    k: int = 1
    walk_length: int = 2
    num_walks: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("khop", "rw"):
            raise ConfigError(f"sampler mode must be 'khop' or 'rw', got {self.mode!r}")
        if self.mode == "khop" and self.k < 1:
            raise ConfigError("k must be >= 1 in khop mode")
        if self.mode == "rw" and (self.walk_length < 1 or self.num_walks < 1):
            raise ConfigError("walk_length and num_walks must be >= 1 in rw mode")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SampledAdjacency:
    matrix: sp.csr_matrix
    degrees_tilde: np.ndarray
    rho: float

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    def edges(self) -> np.ndarray:
        coo = sp.triu(self.matrix, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)

    def stats(self) -> dict:
        deg = self.degrees_tilde
        return {
            "num_nodes": int(self.num_nodes),
            "num_edges": int(self.matrix.nnz // 2),
            "rho": float(self.rho),
            "isolated_nodes": int(np.count_nonzero(deg == 0)),
            "max_degree": int(deg.max()) if deg.size else 0,
        }


def _check_node(g: Graph, v: int) -> int:
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range [0, {g.num_nodes})")
    return int(v)


def khop_neighbors(g: Graph, v: int, k: int) -> set[int]:
    """Nodes ``u != v`` at shortest-path distance at most ``k`` from ``v``."""
    v = _check_node(g, v)
    if k < 1:
        raise ConfigError("k must be >= 1")
    return set(kernels.bfs_within(g.indptr, g.indices, v, k).tolist())


def rw_neighbors(g: Graph, v: int, walk_length: int, num_walks: int, seed: int) -> set[int]:
    """Union of nodes visited by ``num_walks`` simple walks of ``walk_length`` steps from ``v``.

    Each node owns a random stream derived from ``(seed, v)``, so the answer
    does not depend on which other nodes are sampled or in what order.
    """
    v = _check_node(g, v)
    return set(kernels.rw_visits(g.indptr, g.indices, v, walk_length, num_walks, seed & MASK64).tolist())


def _from_pairs(n, rows, cols) -> SampledAdjacency:
    m = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    m = ((m + m.T) > 0).astype(np.float64).tocsr()
    m.sort_indices()
    deg = np.diff(m.indptr).astype(np.int64)
    rho = m.nnz / n if n else 0.0
    return SampledAdjacency(m, deg, float(rho))


def build_sampled_adjacency(g: Graph, cfg: SamplerConfig) -> SampledAdjacency:
    if cfg.mode == "khop":
        rows, cols = kernels.khop_sample_edges(g.indptr, g.indices, g.num_nodes, cfg.k)
    else:
        rows, cols = kernels.rw_sample_edges(
            g.indptr, g.indices, g.num_nodes, cfg.walk_length, cfg.num_walks, cfg.seed & MASK64
        )
    return _from_pairs(g.num_nodes, rows, cols)
