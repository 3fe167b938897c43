"""Encoders, classifier and the composite training objective.

The encoder maps node features to a latent space and the classifier maps the
latent space to class logits.  Two encoders are available:

* ``sgc``: ``H = S^L (X W) + b`` with ``S`` the self-looped normalised
  adjacency, no nonlinearity;
* ``gcn``: ``H = S^L (relu(S X W0 + b0) W1) + b1``.

``L`` is the propagation depth, set separately for the source and target
graphs.  All gradients are derived by hand; ``tests/test_model.py`` checks
them against central finite differences.
"""

from __future__ import annotations

import struct
import weakref
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .discrepancy import KernelConfig, mmd2
from .errors import ConfigError, DataError, ShapeError
from .graph import Graph, GraphBundle, normalized_adjacency
from .numerics import as_dense, row_softmax
from .rng import generator
from .sampling import SampledAdjacency
from .smoothing import l_sr

__all__ = [
    "EncoderConfig",
    "Params",
    "LossBreakdown",
    "init_params",
    "encode",
    "classify",
    "predict",
    "cross_entropy",
    "forward_backward",
    "save_params",
    "load_params",
]

PARAM_LAYOUTS = {
    "sgc": ("enc.w0", "enc.b0", "cls.w", "cls.b"),
    "gcn": ("enc.w0", "enc.b0", "enc.w1", "enc.b1", "cls.w", "cls.b"),
}


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "gcn"
    hidden_dim: int = 128
    prop_layers_source: int = 1
    prop_layers_target: int = 2
    dropout: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PARAM_LAYOUTS:
            raise ConfigError(f"encoder kind must be one of {sorted(PARAM_LAYOUTS)}")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if self.prop_layers_source < 0 or self.prop_layers_target < 0:
            raise ConfigError("propagation depths must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class Params:
    """Named float64 arrays in a fixed order; also used for gradients."""

    def __init__(self, arrays: dict):
        self.arrays = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in arrays.items()}

    def __getitem__(self, name):
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    @property
    def kind(self) -> str:
        return "gcn" if "enc.w1" in self.arrays else "sgc"

    def copy(self) -> "Params":
        return Params({k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> "Params":
        return Params({k: np.zeros_like(v) for k, v in self.arrays.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def with_flat(self, vec) -> "Params":
        out, pos = {}, 0
        for k, v in self.arrays.items():
            out[k] = np.asarray(vec[pos:pos + v.size], dtype=np.float64).reshape(v.shape)
            pos += v.size
        return Params(out)

    def allclose(self, other, **kw) -> bool:
        return self.arrays.keys() == other.arrays.keys() and all(
            np.allclose(v, other[k], **kw) for k, v in self.items()
        )

    def bitwise_equal(self, other) -> bool:
        return self.arrays.keys() == other.arrays.keys() and all(
            v.shape == other[k].shape and v.tobytes() == other[k].tobytes() for k, v in self.items()
        )


@dataclass(frozen=True)
class LossBreakdown:
    l_gc: float
    l_da: float
    l_sr: float
    total: float

    @classmethod
    def combine(cls, l_gc, l_da, l_sr, alpha, beta) -> "LossBreakdown":
        return cls(float(l_gc), float(l_da), float(l_sr), float(l_gc + alpha * l_da + beta * l_sr))


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(cfg: EncoderConfig, feature_dim: int, num_classes: int) -> Params:
    """Glorot-uniform weights and zero biases drawn from ``cfg.seed``."""
    rng = generator(cfg.seed, "init")
    h = cfg.hidden_dim
    arrays = {"enc.w0": _glorot(rng, feature_dim, h), "enc.b0": np.zeros(h)}
    if cfg.kind == "gcn":
        arrays["enc.w1"] = _glorot(rng, h, h)
        arrays["enc.b1"] = np.zeros(h)
    arrays["cls.w"] = _glorot(rng, h, num_classes)
    arrays["cls.b"] = np.zeros(num_classes)
    return Params(arrays)


_OPERATORS: "weakref.WeakKeyDictionary[Graph, sp.csr_matrix]" = weakref.WeakKeyDictionary()


def propagation_operator(g: Graph) -> sp.csr_matrix:
    op = _OPERATORS.get(g)
    if op is None:
        op = _OPERATORS[g] = normalized_adjacency(g, add_self_loops=True)
    return op


def _propagate(op, z, times):
    for _ in range(times):
        z = op @ z
    return np.asarray(z)


def _dropout_sparse(x, p, rng):
    if p == 0.0 or rng is None:
        return x
    keep = rng.random(x.nnz) >= p
    out = x.copy()
    out.data = np.where(keep, x.data / (1.0 - p), 0.0)
    return out


def _dropout_dense(z, p, rng):
    if p == 0.0 or rng is None:
        return z, None
    mask = (rng.random(z.shape) >= p) / (1.0 - p)
    return z * mask, mask


def _check_params(params, cfg, bundle):
    if params.kind != cfg.kind:
        raise ShapeError(f"params are for a {params.kind} encoder, config says {cfg.kind}")
    w0 = params["enc.w0"]
    if w0.shape[0] != bundle.feature_dim:
        raise ShapeError("feature dimension mismatch", bundle.features.shape, w0.shape)
    if params["cls.w"].shape[1] != bundle.num_classes:
        raise ShapeError("class count mismatch", params["cls.w"].shape, (bundle.num_classes,))


def _encode_forward(bundle, params, cfg, prop_layers, rng):
    """Forward pass returning ``(H, cache)``; ``rng=None`` disables dropout."""
    _check_params(params, cfg, bundle)
    op = propagation_operator(bundle.graph)
    x = _dropout_sparse(bundle.features, cfg.dropout, rng)
    cache = {"x": x, "op": op, "L": prop_layers}
    if cfg.kind == "sgc":
        z = np.asarray(x @ params["enc.w0"])
        h = _propagate(op, z, prop_layers) + params["enc.b0"]
        return h, cache
    z1 = np.asarray(op @ np.asarray(x @ params["enc.w0"])) + params["enc.b0"]
    a1 = np.maximum(z1, 0.0)
    a1d, mask = _dropout_dense(a1, cfg.dropout, rng)
    z2 = a1d @ params["enc.w1"]
    h = _propagate(op, z2, prop_layers) + params["enc.b1"]
    cache.update(z1=z1, a1d=a1d, mask=mask)
    return h, cache


def _encode_backward(dh, params, cfg, cache, grads):
    op, x, depth = cache["op"], cache["x"], cache["L"]
    if cfg.kind == "sgc":
        dz = _propagate(op, dh, depth)  # op is symmetric
        grads["enc.w0"] += np.asarray(x.T @ dz)
        grads["enc.b0"] += dh.sum(0)
        return
    dz2 = _propagate(op, dh, depth)
    grads["enc.w1"] += cache["a1d"].T @ dz2
    grads["enc.b1"] += dh.sum(0)
    da = dz2 @ params["enc.w1"].T
    if cache["mask"] is not None:
        da = da * cache["mask"]
    dz1 = np.where(cache["z1"] > 0.0, da, 0.0)
    grads["enc.b0"] += dz1.sum(0)
    grads["enc.w0"] += np.asarray(x.T @ np.asarray(op @ dz1))


def encode(bundle: GraphBundle, params: Params, cfg: EncoderConfig, prop_layers: int,
           training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """Latent node representations, shape ``(num_nodes, hidden_dim)``."""
    h, _ = _encode_forward(bundle, params, cfg, prop_layers, rng if training else None)
    return h


def classify(h, params: Params) -> np.ndarray:
    h = as_dense(h)
    w = params["cls.w"]
    if h.shape[1] != w.shape[0]:
        raise ShapeError("classifier input mismatch", h.shape, w.shape)
    return h @ w + params["cls.b"]


def predict(logits) -> np.ndarray:
    """Arg-max class per row; ties go to the lowest index."""
    return np.argmax(as_dense(logits), axis=1)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy over all rows and its gradient w.r.t. the logits."""
    logits = as_dense(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError("one label per row expected", logits.shape, labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise DataError(f"labels must lie in [0, {c})")
    if n == 0:
        return 0.0, np.zeros_like(logits)
    z = logits - logits.max(1, keepdims=True)
    logsum = np.log(np.exp(z).sum(1))
    value = float(np.mean(logsum - z[np.arange(n), labels]))
    grad = row_softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return value, grad


@dataclass(frozen=True, eq=False)
class StepResult:
    breakdown: LossBreakdown
    grads: Params
    sigma: float
    h_source: np.ndarray
    h_target: np.ndarray


def forward_backward(source: GraphBundle, target: GraphBundle, sa: SampledAdjacency,
                     params: Params, cfg: EncoderConfig, alpha: float, beta: float,
                     rng: np.random.Generator | None = None,
                     kernel: KernelConfig = KernelConfig(),
                     sr_reduction: str = "mean") -> StepResult:
    """Composite loss ``l_gc + alpha * l_da + beta * l_sr`` and its exact gradient.

    ``rng=None`` disables dropout.  Target labels are never read.  Loss terms
    with a zero weight are still evaluated for reporting but contribute no
    gradient.  ``sr_reduction`` selects the per-node mean (default) or the raw
    pair sum for the smoothing term.
    """
    if source.feature_dim != target.feature_dim or source.num_classes != target.num_classes:
        raise ShapeError(
            "source and target bundles disagree",
            (source.feature_dim, source.num_classes), (target.feature_dim, target.num_classes),
        )
    if sa.num_nodes != target.num_nodes:
        raise ShapeError("sampled adjacency does not match the target graph",
                         sa.matrix.shape, (target.num_nodes,))
    hs, cache_s = _encode_forward(source, params, cfg, cfg.prop_layers_source, rng)
    ht, cache_t = _encode_forward(target, params, cfg, cfg.prop_layers_target, rng)

    labeled = source.labeled_mask()
    hs_in, cls_mask = _dropout_dense(hs[labeled], cfg.dropout, rng)
    logits = classify(hs_in, params)
    l_gc, dlogits = cross_entropy(logits, source.labels[labeled])

    da = mmd2(hs, ht, kernel)
    sr = l_sr(ht, sa, sr_reduction)
    breakdown = LossBreakdown.combine(l_gc, da.value, sr.value, alpha, beta)

    grads = params.zeros_like()
    grads["cls.w"][...] = hs_in.T @ dlogits
    grads["cls.b"][...] = dlogits.sum(0)
    dhs = np.zeros_like(hs)
    dh_lab = dlogits @ params["cls.w"].T
    dhs[labeled] = dh_lab if cls_mask is None else dh_lab * cls_mask
    dht = np.zeros_like(ht)
    if alpha:
        dhs += alpha * da.grad_hs
        dht += alpha * da.grad_ht
    if beta:
        dht += beta * sr.grad_h
    _encode_backward(dhs, params, cfg, cache_s, grads.arrays)
    if alpha or beta:
        _encode_backward(dht, params, cfg, cache_t, grads.arrays)
    return StepResult(breakdown, grads, da.sigma, hs, ht)


def save_params(params: Params, path) -> None:
    """Binary layout: little-endian int64 shape table, then the float64 payload.

    Table: ``count, (ndim, dim_1, ..., dim_ndim) * count``.  Array order is the
    canonical layout of the encoder kind, so the count identifies the kind.
    """
    layout = PARAM_LAYOUTS[params.kind]
    header = [len(layout)]
    for name in layout:
        arr = params[name]
        header += [arr.ndim, *arr.shape]
    with open(path, "wb") as fh:
        fh.write(struct.pack(f"<{len(header)}q", *header))
        for name in layout:
            fh.write(params[name].astype("<f8").tobytes())


def load_params(path) -> Params:
    data = Path(path).read_bytes()
    pos = 0

    def take_int():
        nonlocal pos
        if pos + 8 > len(data):
            raise DataError(f"{path}: truncated header")
        (v,) = struct.unpack_from("<q", data, pos)
        pos += 8
        return v

    count = take_int()
    layout = next((names for names in PARAM_LAYOUTS.values() if len(names) == count), None)
    if layout is None:
        raise DataError(f"{path}: unexpected array count {count}")
    shapes = []
    for _ in range(count):
        ndim = take_int()
        if not 0 <= ndim <= 8:
            raise DataError(f"{path}: bad ndim {ndim}")
        shapes.append(tuple(take_int() for _ in range(ndim)))
    arrays = {}
    for name, shape in zip(layout, shapes):
        size = int(np.prod(shape, dtype=np.int64))
        if pos + 8 * size > len(data):
            raise DataError(f"{path}: truncated payload")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(data):
        raise DataError(f"{path}: {len(data) - pos} trailing bytes")
    return Params(arrays)
