"""Full-batch optimisation of the composite objective, evaluation and export."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .discrepancy import KernelConfig
from .errors import ConfigError, NumericError
from .graph import GraphBundle
from .metrics import Metrics, evaluate_predictions
from .model import (
    EncoderConfig,
    LossBreakdown,
    Params,
    classify,
    encode,
    forward_backward,
    init_params,
    predict,
)
from .rng import derive_seed, generator
from .sampling import SampledAdjacency, SamplerConfig, build_sampled_adjacency

__all__ = [
    "TrainConfig",
    "TrainResult",
    "Adam",
    "SGD",
    "train",
    "evaluate",
    "export_embeddings",
    "write_history",
    "LR_GRID",
]

LR_GRID = (0.01, 0.03, 0.05)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.3
    beta: float = 0.2
    lr: float = 0.01
    epochs: int = 200
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    eval_every: int = 1
    sr_reduction: str = "mean"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.sr_reduction not in ("mean", "sum"):
            raise ConfigError("sr_reduction must be 'mean' or 'sum'")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        nested = {"sampler": SamplerConfig, "encoder": EncoderConfig, "kernel": KernelConfig}
        for key, typ in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = typ(**data[key])
        return cls(**data)

    def effective_sampler(self) -> SamplerConfig:
        return replace(self.sampler, seed=derive_seed(self.seed, "sampler", self.sampler.seed))

    def effective_encoder(self) -> EncoderConfig:
        return replace(self.encoder, seed=derive_seed(self.seed, "encoder", self.encoder.seed))


class SGD:
    def __init__(self, lr: float, weight_decay: float = 0.0):
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self, params: Params, grads: Params) -> None:
        for name, p in params.items():
            g = grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            p -= self.lr * g


class Adam:
    """Adam with bias correction, updating ``Params`` in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SGD(cfg.lr, cfg.weight_decay)
    return Adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay)


def evaluate(params: Params, bundle: GraphBundle, encoder: EncoderConfig,
             prop_layers: int | None = None) -> Metrics | None:
    """Metrics of the deterministic (dropout-free) predictions on ``bundle``.

    Only labelled nodes are scored; returns ``None`` when there are none.
    NMI compares the predicted partition with the true classes.
    """
    mask = bundle.labeled_mask()
    if not mask.any():
        return None
    depth = encoder.prop_layers_target if prop_layers is None else prop_layers
    h = encode(bundle, params, encoder, depth)
    pred = predict(classify(h, params))
    return evaluate_predictions(pred[mask], bundle.labels[mask], bundle.num_classes)


@dataclass(eq=False)
class TrainResult:
    params: Params
    history: list
    sampled: SampledAdjacency
    config: TrainConfig

    @property
    def final_metrics(self) -> dict | None:
        for rec in reversed(self.history):
            if rec["micro_f1"] is not None:
                return {k: rec[k] for k in ("micro_f1", "macro_f1", "nmi")}
        return None


def train(source: GraphBundle, target: GraphBundle, cfg: TrainConfig,
          sampled: SampledAdjacency | None = None) -> TrainResult:
    """Optimise ``l_gc + alpha l_da + beta l_sr`` for ``cfg.epochs`` full-batch steps.

    The pruned adjacency is built once from the target graph.  Target labels
    are only used to fill the metric columns of the history.
    """
    encoder = cfg.effective_encoder()
    params = init_params(encoder, source.feature_dim, source.num_classes)
    if sampled is None:
        sampled = build_sampled_adjacency(target.graph, cfg.effective_sampler())
    opt = _optimizer(cfg)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        rng = generator(cfg.seed, "dropout", epoch) if encoder.dropout > 0 else None
        step = forward_backward(source, target, sampled, params, encoder,
                                cfg.alpha, cfg.beta, rng=rng, kernel=cfg.kernel,
                                sr_reduction=cfg.sr_reduction)
        b = step.breakdown
        if not all(math.isfinite(x) for x in (b.l_gc, b.l_da, b.l_sr, b.total)):
            raise NumericError(f"non-finite loss at epoch {epoch}: {b}")
        opt.step(params, step.grads)
        if not all(np.all(np.isfinite(p)) for _, p in params.items()):
            raise NumericError(f"non-finite parameters after epoch {epoch}")
        metrics = None
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            metrics = evaluate(params, target, encoder)
        history.append(_record(epoch, b, metrics))
    return TrainResult(params, history, sampled, cfg)


def _record(epoch: int, b: LossBreakdown, metrics: Metrics | None) -> dict:
    rec = {"epoch": epoch, **asdict(b)}
    for key in ("micro_f1", "macro_f1", "nmi"):
        rec[key] = None if metrics is None else getattr(metrics, key)
    return rec


def write_history(history, path) -> None:
    """One JSON object per epoch."""
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps(rec) + "\n")


def export_embeddings(params: Params, bundle: GraphBundle, encoder: EncoderConfig, out,
                      prop_layers: int | None = None) -> Path:
    """Write the evaluation-mode latent matrix as TSV, row i = node i."""
    depth = encoder.prop_layers_target if prop_layers is None else prop_layers
    h = encode(bundle, params, encoder, depth)
    out = Path(out)
    with open(out, "w") as fh:
        for row in h.tolist():
            fh.write("\t".join(repr(x) for x in row) + "\n")
    return out
