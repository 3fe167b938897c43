"""Graph storage, validation, normalisation and motif census."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DataError
from .numerics import as_csr

__all__ = [
    "Graph",
    "GraphBundle",
    "MotifCensus",
    "motif_census",
    "normalized_adjacency",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected unweighted graph in CSR form.

    Use :meth:`from_edges` or :meth:`from_adjacency`; both validate that the
    adjacency is binary, symmetric and has an empty diagonal.
    """

    num_nodes: int
    adjacency: sp.csr_matrix
    degrees: np.ndarray = field(repr=False)

    @classmethod
    def from_adjacency(cls, adjacency) -> "Graph":
        a = as_csr(adjacency)
        n, m = a.shape
        if n != m:
            raise DataError(f"adjacency must be square, got {a.shape}")
        if a.nnz and not np.all(a.data == 1.0):
            raise DataError("adjacency must be binary")
        if a.diagonal().any():
            raise DataError("adjacency has self-loops")
        if (a != a.T).nnz:
            raise DataError("adjacency is not symmetric")
        a.indptr = a.indptr.astype(np.int64)
        a.indices = a.indices.astype(np.int64)
        return cls(n, a, np.diff(a.indptr).astype(np.int64))

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        """Build from an iterable/array of undirected pairs.

        Self-loops and repeated pairs (in either orientation) are rejected.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= num_nodes):
            raise DataError(f"edge endpoint out of range [0, {num_nodes})")
        if np.any(e[:, 0] == e[:, 1]):
            raise DataError("self-loop edges are not allowed")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        key = lo * num_nodes + hi
        if np.unique(key).size != key.size:
            raise DataError("duplicate edges are not allowed")
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        a = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes)
        )
        return cls.from_adjacency(a)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    @property
    def indptr(self) -> np.ndarray:
        return self.adjacency.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.adjacency.indices

    def edges(self) -> np.ndarray:
        """Canonical ``(E, 2)`` array of pairs ``u < v`` sorted lexicographically."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


@dataclass(frozen=True, eq=False)
class GraphBundle:
    """A graph with node features and (optionally partial) labels.

    ``labels`` holds class ids with ``-1`` marking unlabelled nodes, or is
    ``None`` when no labels are known at all.
    """

    graph: Graph
    features: sp.csr_matrix
    labels: np.ndarray | None
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if self.features.shape[0] != self.graph.num_nodes:
            raise DataError(
                f"features have {self.features.shape[0]} rows for {self.graph.num_nodes} nodes"
            )
        if not np.all(np.isfinite(self.features.data)):
            raise DataError("feature values must be finite")
        if self.labels is not None:
            if self.labels.shape != (self.graph.num_nodes,):
                raise DataError("labels must have one entry per node")
            bad = (self.labels < -1) | (self.labels >= self.num_classes)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise DataError(
                    f"label {int(self.labels[i])} of node {i} outside [0, {self.num_classes})"
                )

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def dense_features(self) -> np.ndarray:
        return np.asarray(self.features.toarray(), dtype=np.float64)

    def labeled_mask(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(self.num_nodes, dtype=bool)
        return self.labels >= 0

    def without_labels(self) -> "GraphBundle":
        return GraphBundle(self.graph, self.features, None, self.num_classes, self.name)

    def stats(self) -> dict:
        """Node/edge/attribute/label counts plus both density conventions."""
        n = self.num_nodes
        e = self.graph.num_edges
        return {
            "name": self.name,
            "num_nodes": n,
            "num_edges": e,
            "feature_dim": self.feature_dim,
            "feature_nnz": int(self.features.nnz),
            "num_classes": self.num_classes,
            "num_labeled": int(self.labeled_mask().sum()),
            "density_2e_over_n2": 2.0 * e / (n * n) if n else 0.0,
            "density_2e_over_n_n_minus_1": 2.0 * e / (n * (n - 1)) if n > 1 else 0.0,
        }


def normalized_adjacency(g: Graph, add_self_loops: bool = True) -> sp.csr_matrix:
    """Symmetric normalisation ``D^-1/2 (A [+ I]) D^-1/2``.

    Degrees are taken from the (possibly self-looped) matrix; isolated nodes
    get zero rows, or a unit diagonal entry when self-loops are added.
    """
    a = g.adjacency
    if add_self_loops:
        a = a + sp.identity(g.num_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
    d = sp.diags(inv_sqrt)
    return as_csr(d @ a @ d)


@dataclass(frozen=True)
class MotifCensus:
    triangles: int
    stars: dict  # k -> number of k-stars, k = 3..6

    def to_dict(self) -> dict:
        return {"triangles": self.triangles, **{f"stars_{k}": v for k, v in self.stars.items()}}


def motif_census(g: Graph) -> MotifCensus:
    """Exact triangle count and k-star counts ``sum_v C(deg v, k)`` for k = 3..6."""
    tri = kernels.count_triangles(g.indptr, g.indices, g.num_nodes)
    degs = [int(d) for d in g.degrees]
    stars = {k: sum(comb(d, k) for d in degs) for k in range(3, 7)}
    return MotifCensus(tri, stars)
