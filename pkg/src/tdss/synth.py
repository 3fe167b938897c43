"""Synthetic source/target pairs with a planted structural shift.

Both domains are planted-partition graphs sharing the same class-conditional
feature distribution.  They differ only in how extra structure is wired:

* ``triangle`` bias: after each base edge (u, v), with probability
  ``closure_prob`` a wedge v-u-w is closed by adding (v, w).  Neighbours are
  mostly same-class, so the closures are mostly intra-class triangles.
* ``star`` bias: ``hub_fraction`` of the nodes become hubs and every other
  node is wired to one hub drawn uniformly, regardless of class, the way
  many papers cite the same few core references.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .graph import Graph, GraphBundle
from .rng import generator

__all__ = ["SynthConfig", "generate_bundle", "generate_synthetic_pair", "feature_prototypes"]

TOPIC_RATE = 0.35
BACKGROUND_RATE = 0.1


@dataclass(frozen=True)
class SynthConfig:
    num_nodes: int = 500
    feature_dim: int = 32
    num_classes: int = 4
    motif_bias: str = "triangle"
    closure_prob: float = 0.8
    hub_fraction: float = 0.05
    intra_class_edge_prob: float = 0.012
    inter_class_edge_prob: float = 0.002
    feature_noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.motif_bias not in ("triangle", "star"):
            raise ConfigError(f"motif_bias must be 'triangle' or 'star', got {self.motif_bias!r}")
        for name in ("closure_prob", "hub_fraction", "intra_class_edge_prob", "inter_class_edge_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if self.num_nodes < 1 or self.feature_dim < 1:
            raise ConfigError("num_nodes and feature_dim must be positive")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def feature_prototypes(feature_dim: int, num_classes: int, seed: int) -> np.ndarray:
    """Per-class activation probabilities, shape ``(num_classes, feature_dim)``.

    Each dimension is a topic word of exactly one class (round-robin over a
    seeded permutation) and background noise for the others.
    """
    rng = generator(seed, "prototypes")
    owner = rng.permutation(feature_dim) % num_classes
    probs = np.full((num_classes, feature_dim), BACKGROUND_RATE)
    probs[owner, np.arange(feature_dim)] = TOPIC_RATE
    return probs


def _block_pairs(rng, members_a, members_b, p, same):
    """Sample the edges of one planted-partition block without replacement."""
    na, nb = members_a.size, members_b.size
    total = na * (na - 1) // 2 if same else na * nb
    count = rng.binomial(total, p) if total else 0
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    keys = np.empty(0, dtype=np.int64)
    while keys.size < count:
        need = count - keys.size
        i = rng.integers(0, na, size=2 * need + 8)
        j = rng.integers(0, nb, size=2 * need + 8)
        if same:
            ok = i != j
            i, j = np.minimum(i[ok], j[ok]), np.maximum(i[ok], j[ok])
        cand = i * nb + j
        # keep first occurrences in draw order so the result stays seed-deterministic
        merged = np.concatenate([keys, cand])
        _, first = np.unique(merged, return_index=True)
        keys = merged[np.sort(first)][:count]
    i, j = np.divmod(keys, nb)
    return np.stack([members_a[i], members_b[j]], axis=1)


def _base_edges(rng, labels, cfg):
    classes = [np.flatnonzero(labels == c) for c in range(cfg.num_classes)]
    blocks = []
    for a in range(cfg.num_classes):
        for b in range(a, cfg.num_classes):
            p = cfg.intra_class_edge_prob if a == b else cfg.inter_class_edge_prob
            blocks.append(_block_pairs(rng, classes[a], classes[b], p, a == b))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    return edges[rng.permutation(len(edges))]


def _close_triangles(rng, n, edges, closure_prob):
    adj = [set() for _ in range(n)]
    out = []

    def add(u, v):
        adj[u].add(v)
        adj[v].add(u)
        out.append((u, v))

    coins = rng.random(len(edges))
    for (u, v), coin in zip(edges.tolist(), coins.tolist()):
        if v in adj[u]:
            continue
        add(u, v)
        if coin < closure_prob:
            cands = sorted(adj[u] - {v} - adj[v])
            if cands:
                add(v, cands[int(rng.integers(len(cands)))])
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def _wire_hubs(rng, n, edges, cfg):
    n_hubs = int(round(cfg.hub_fraction * n))
    if n_hubs == 0:
        return edges
    hubs = np.sort(rng.choice(n, size=n_hubs, replace=False))
    is_hub = np.zeros(n, dtype=bool)
    is_hub[hubs] = True
    leaves = np.flatnonzero(~is_hub)
    extra = np.stack([leaves, hubs[rng.integers(0, n_hubs, size=leaves.size)]], axis=1)
    both = np.concatenate([edges, extra])
    key = np.minimum(both[:, 0], both[:, 1]) * n + np.maximum(both[:, 0], both[:, 1])
    _, first = np.unique(key, return_index=True)
    return both[np.sort(first)]


def _features(rng, labels, probs, noise):
    n = labels.size
    active = rng.random((n, probs.shape[1])) < probs[labels]
    values = 1.0 + noise * rng.standard_normal((n, probs.shape[1]))
    dense = np.where(active, values, 0.0)
    return sp.csr_matrix(dense)


def generate_bundle(cfg: SynthConfig, prototypes: np.ndarray | None = None, name: str = "") -> GraphBundle:
    """Draw one labelled synthetic bundle; deterministic in ``cfg``."""
    if prototypes is None:
        prototypes = feature_prototypes(cfg.feature_dim, cfg.num_classes, cfg.seed)
    rng = generator(cfg.seed, "synth")
    n = cfg.num_nodes
    labels = rng.permutation(np.arange(n) % cfg.num_classes).astype(np.int64)
    edges = _base_edges(rng, labels, cfg)
    if cfg.motif_bias == "triangle" and cfg.closure_prob > 0:
        edges = _close_triangles(rng, n, edges, cfg.closure_prob)
    elif cfg.motif_bias == "star" and cfg.hub_fraction > 0:
        edges = _wire_hubs(rng, n, edges, cfg)
    graph = Graph.from_edges(n, edges)
    features = _features(rng, labels, prototypes, cfg.feature_noise)
    return GraphBundle(graph, features, labels, cfg.num_classes, name or f"synth-{cfg.motif_bias}")


def generate_synthetic_pair(source_cfg: SynthConfig, target_cfg: SynthConfig):
    """Source and target bundles sharing class-conditional feature prototypes."""
    if source_cfg.feature_dim != target_cfg.feature_dim:
        raise ConfigError("source and target must share feature_dim")
    if source_cfg.num_classes != target_cfg.num_classes:
        raise ConfigError("source and target must share num_classes")
    protos = feature_prototypes(source_cfg.feature_dim, source_cfg.num_classes, source_cfg.seed)
    source = generate_bundle(source_cfg, protos, name="source")
    target = generate_bundle(target_cfg, protos, name="target")
    return source, target
