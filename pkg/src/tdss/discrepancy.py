"""Domain-discrepancy measures and risk-bound diagnostics.

``mmd2`` is the differentiable alignment loss used in training.  The rest
(``tvd``, ``estimate_smoothness``, ``bound_terms``) are reporting tools.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import pdist

from . import kernels
from .errors import ConfigError, ShapeError
from .graph import Graph, GraphBundle
from .numerics import as_csr, as_dense
from .rng import generator

__all__ = [
    "KernelConfig",
    "MMDResult",
    "DiscreteDistribution",
    "BoundDiagnostics",
    "mmd2",
    "median_heuristic",
    "tvd",
    "estimate_smoothness",
    "bound_terms",
    "embedding_histograms",
    "feature_diameter",
    "median_inf_distance",
]

SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class KernelConfig:
    bandwidth_mode: str = "median_heuristic"
    sigma: float = 1.0

    def __post_init__(self):
        if self.bandwidth_mode not in ("median_heuristic", "fixed"):
            raise ConfigError(f"unknown bandwidth_mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "fixed" and not self.sigma > 0:
            raise ConfigError("sigma must be positive in fixed mode")


@dataclass(frozen=True, eq=False)
class MMDResult:
    value: float
    grad_hs: np.ndarray
    grad_ht: np.ndarray
    sigma: float


def _sq_dists(a, b):
    d = a @ b.T
    d *= -2.0
    d += np.einsum("ij,ij->i", a, a)[:, None]
    d += np.einsum("ij,ij->i", b, b)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def median_heuristic(hs, ht, max_rows: int = 2048, seed: int = 0) -> float:
    """Median pairwise Euclidean distance over the pooled rows, floored at 1e-6.

    Pools larger than ``max_rows`` are subsampled without replacement using a
    stream derived from ``seed``.
    """
    pooled = np.vstack([as_dense(hs), as_dense(ht)])
    if pooled.shape[0] < 2:
        raise ValueError("median heuristic needs at least two rows")
    if pooled.shape[0] > max_rows:
        idx = generator(seed, "median").choice(pooled.shape[0], size=max_rows, replace=False)
        pooled = pooled[np.sort(idx)]
    return max(float(np.median(pdist(pooled))), SIGMA_FLOOR)


@functools.lru_cache(maxsize=8)
def _upper_flat_index(size: int) -> np.ndarray:
    rows, cols = np.triu_indices(size, 1)
    return rows * size + cols


def _median_from_square(d2) -> float:
    """Median pooled pairwise distance from the full squared-distance matrix."""
    sq = d2.ravel()[_upper_flat_index(d2.shape[0])]
    mid = sq.size // 2
    if sq.size % 2:
        value = np.sqrt(np.partition(sq, mid)[mid])
    else:
        part = np.partition(sq, (mid - 1, mid))
        value = 0.5 * (np.sqrt(part[mid - 1]) + np.sqrt(part[mid]))
    return max(float(value), SIGMA_FLOOR)


def mmd2(hs, ht, cfg: KernelConfig = KernelConfig(), max_rows: int = 2048) -> MMDResult:
    """Biased squared MMD with a Gaussian kernel ``exp(-||x-y||^2 / (2 sigma^2))``.

    The bandwidth is held constant for differentiation even when chosen by the
    median heuristic.  Written over the pooled rows ``P`` with signed weights
    ``w = (1/m, ..., -1/n, ...)`` the statistic is ``w^T K w``.
    """
    hs = as_dense(hs)
    ht = as_dense(ht)
    if hs.shape[1] != ht.shape[1]:
        raise ShapeError("mmd2 column mismatch", hs.shape, ht.shape)
    m, n = hs.shape[0], ht.shape[0]
    if m == 0 or n == 0:
        raise ShapeError("mmd2 needs nonempty inputs", hs.shape, ht.shape)
    pooled = np.vstack([hs, ht])
    d2 = _sq_dists(pooled, pooled)
    np.fill_diagonal(d2, 0.0)
    if cfg.bandwidth_mode == "fixed":
        sigma = cfg.sigma
    elif m + n <= max_rows:
        sigma = _median_from_square(d2)
    else:
        sigma = median_heuristic(hs, ht, max_rows)
    s2 = sigma * sigma
    k = d2  # reused in place; the distances are not needed past this point
    k *= -0.5 / s2
    np.exp(k, out=k)
    w = np.concatenate([np.full(m, 1.0 / m), np.full(n, -1.0 / n)])
    kw = k @ w
    value = float(w @ kw)
    grad = (-2.0 / s2) * w[:, None] * (kw[:, None] * pooled - k @ (w[:, None] * pooled))
    return MMDResult(value, grad[:m], grad[m:], float(sigma))


@dataclass(frozen=True)
class DiscreteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)


def tvd(p, q) -> float:
    """Total variation distance ``1/2 sum |p_v - q_v|``."""
    p = p if isinstance(p, DiscreteDistribution) else DiscreteDistribution(p)
    q = q if isinstance(q, DiscreteDistribution) else DiscreteDistribution(q)
    if p.probs.shape != q.probs.shape:
        raise ShapeError("tvd support mismatch", p.probs.shape, q.probs.shape)
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def estimate_smoothness(h, g, k: int = 2, r: float = math.inf, features=None) -> float:
    """Empirical model smoothness.

    Mean over nodes i of the largest ``||h_i - h_j||_inf`` among nodes j within
    ``k`` hops whose features satisfy ``||x_i - x_j||_inf <= r``; a node with
    no such j contributes 0.  ``g`` may be a bundle, in which case its
    features are used.
    """
    if isinstance(g, GraphBundle):
        features = g.features if features is None else features
        g = g.graph
    if features is None:
        raise ValueError("features are required for the r-filter")
    if k < 1 or not r > 0:
        raise ConfigError("need k >= 1 and r > 0")
    h = as_dense(h)
    if h.shape[0] != g.num_nodes:
        raise ShapeError("estimate_smoothness row mismatch", h.shape, (g.num_nodes,))
    x = as_csr(features)
    if x.shape[0] != g.num_nodes:
        raise ShapeError("feature row mismatch", x.shape, (g.num_nodes,))
    if g.num_nodes == 0:
        return 0.0
    sups = kernels.smoothness_sup(
        g.indptr, g.indices, h,
        x.indptr.astype(np.int64), x.indices.astype(np.int64), x.data,
        int(k), float(r),
    )
    return float(np.mean(sups))


@dataclass(frozen=True)
class BoundDiagnostics:
    gamma: float
    upsilon: float
    phi_s: float
    phi_t: float
    discrepancy: float
    mmd: float | None
    xi: float
    r: float
    k: int
    m: int
    n: int
    d: int
    phi: float
    exponent: float
    log_Z: float
    log_K_terms: tuple
    log_K: float
    source_risk: float | None = None
    bound: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["log_K_terms"] = list(self.log_K_terms)
        return out


def bound_terms(
    *,
    gamma: float,
    upsilon: float,
    phi_s: float,
    phi_t: float,
    discrepancy: float,
    xi: float,
    r: float,
    k: int,
    m: int,
    n: int,
    d: int,
    mmd: float | None = None,
    phi: float | None = None,
    source_risk: float | None = None,
) -> BoundDiagnostics:
    """Right-hand-side terms of the smoothness risk bound, in log domain.

    ``Z = sqrt((2d)^(2 phi^2 gamma / r^2 + 1) log 2 + 2 log(1/xi))`` and
    ``K = upsilon Z / sqrt(m) + upsilon Z / sqrt(n) + upsilon sqrt(log(1/xi) / (2m))``.
    The power of ``2d`` overflows for realistic feature dimensions, so
    ``log Z`` is assembled with log-sum-exp.  ``phi`` defaults to
    ``max(phi_s, phi_t)``.  ``bound`` is only filled when ``source_risk`` is
    given and ``K`` is representable.
    """
    for name, value in (("gamma", gamma), ("upsilon", upsilon), ("r", r)):
        if not value > 0:
            raise ConfigError(f"{name} must be positive")
    for name, value in (("k", k), ("m", m), ("n", n), ("d", d)):
        if value < 1:
            raise ConfigError(f"{name} must be >= 1")
    if not 0.0 < xi < 1.0:
        raise ConfigError("xi must lie in (0, 1)")
    if min(phi_s, phi_t, discrepancy) < 0:
        raise ConfigError("smoothness and discrepancy terms must be nonnegative")
    if phi is None:
        phi = max(phi_s, phi_t)

    log_inv_xi = -math.log(xi)
    exponent = 2.0 * phi * phi * gamma / (r * r) + 1.0
    a = exponent * math.log(2.0 * d) + math.log(math.log(2.0))
    b = math.log(2.0 * log_inv_xi)
    log_radicand = max(a, b) + math.log1p(math.exp(-abs(a - b)))
    log_z = 0.5 * log_radicand

    log_ups = math.log(upsilon)
    terms = (
        log_ups + log_z - 0.5 * math.log(m),
        log_ups + log_z - 0.5 * math.log(n),
        log_ups + 0.5 * (math.log(log_inv_xi) - math.log(2.0 * m)),
    )
    top = max(terms)
    log_k = top + math.log(sum(math.exp(t - top) for t in terms))

    bound = None
    if source_risk is not None and log_k < 700.0:
        bound = source_risk + 2.0 * discrepancy + phi_s + phi_t + math.exp(log_k)
    return BoundDiagnostics(
        gamma=float(gamma), upsilon=float(upsilon), phi_s=float(phi_s), phi_t=float(phi_t),
        discrepancy=float(discrepancy), mmd=None if mmd is None else float(mmd),
        xi=float(xi), r=float(r), k=int(k), m=int(m), n=int(n), d=int(d),
        phi=float(phi), exponent=exponent, log_Z=log_z, log_K_terms=terms, log_K=log_k,
        source_risk=source_risk, bound=bound,
    )


def embedding_histograms(hs, ht, bins: int = 20):
    """Discretise both embedding sets on a shared 1-D projection.

    Rows are projected onto the leading principal direction of the pooled,
    centred embeddings and binned on common equal-width edges.  Returns two
    :class:`DiscreteDistribution` objects suitable for :func:`tvd`.
    """
    hs = as_dense(hs)
    ht = as_dense(ht)
    pooled = np.vstack([hs, ht])
    centre = pooled.mean(0)
    _, _, vt = np.linalg.svd(pooled - centre, full_matrices=False)
    axis = vt[0] if vt.size else np.zeros(pooled.shape[1])
    ps = (hs - centre) @ axis
    pt = (ht - centre) @ axis
    lo, hi = float(min(ps.min(), pt.min())), float(max(ps.max(), pt.max()))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    cs, _ = np.histogram(ps, edges)
    ct, _ = np.histogram(pt, edges)
    return DiscreteDistribution(cs / cs.sum()), DiscreteDistribution(ct / ct.sum())


def _subsample(x, max_rows, seed, tag):
    if x.shape[0] > max_rows:
        idx = generator(seed, tag).choice(x.shape[0], size=max_rows, replace=False)
        x = x[np.sort(idx)]
    return x


def feature_diameter(features, max_rows: int = 2048, seed: int = 0) -> float:
    """Largest pairwise Euclidean feature distance (on a seeded subsample)."""
    x = _subsample(as_csr(features), max_rows, seed, "diameter").toarray()
    return float(pdist(x).max()) if x.shape[0] > 1 else 0.0


def median_inf_distance(features, max_rows: int = 2048, seed: int = 0) -> float:
    """Median pairwise sup-norm feature distance (on a seeded subsample)."""
    x = _subsample(as_csr(features), max_rows, seed, "inf-median").toarray()
    return float(np.median(pdist(x, "chebyshev"))) if x.shape[0] > 1 else 0.0
