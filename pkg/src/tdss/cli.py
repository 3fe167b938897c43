"""Command-line driver: ``tdss train|eval|sample|synth|diag``.

A run is described by one JSON config whose keys mirror the dataclass
fields (``alpha``, ``beta``, ``sampler.walk_length``, ``encoder.kind``, ...)
plus a few driver keys: ``source_bundle``/``target_bundle`` (directories,
or ``null`` to draw the synthetic pair described by ``synth_source`` and
``synth_target``), ``params`` (for eval/diag) and ``diag``.  ``--override``
takes dotted keys that must already exist in the effective config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle_io import load_bundle, save_bundle, write_edges
from .discrepancy import (
    bound_terms,
    embedding_histograms,
    estimate_smoothness,
    median_inf_distance,
    mmd2,
    tvd,
)
from .errors import ConfigError, DataError, NumericError, TDSSError
from .graph import motif_census
from .model import classify, encode, init_params, load_params, predict, save_params
from .rng import MASK64, derive_seed
from .sampling import build_sampled_adjacency
from .synth import SynthConfig, generate_synthetic_pair
from .training import TrainConfig, evaluate, train, write_history

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("train", "eval", "sample", "synth", "diag")


def default_config() -> dict:
    synth_src = SynthConfig(motif_bias="triangle").to_dict()
    synth_tgt = SynthConfig(motif_bias="star").to_dict()
    # null synth seeds are derived from the top-level seed
    synth_src["seed"] = synth_tgt["seed"] = None
    return {
        **TrainConfig().to_dict(),
        "source_bundle": None,
        "target_bundle": None,
        "synth_source": synth_src,
        "synth_target": synth_tgt,
        "params": None,
        "diag": {"k": 2, "r": None, "xi": 0.05, "gamma": 1.0, "upsilon": 1.0},
    }


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key {prefix + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, prefix + key + ".")
        else:
            base[key] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    *parents, leaf = key.strip().split(".")
    node = cfg
    for part in parents:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[part]
    if leaf not in node or isinstance(node[leaf], dict):
        raise ConfigError(f"unknown config key {key!r}")
    node[leaf] = _parse_value(raw)


def resolve_config(config_path, overrides, seed) -> dict:
    cfg = default_config()
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_path}: top level must be an object")
        _merge(cfg, loaded)
    for item in overrides or ():
        apply_override(cfg, item)
    if seed is not None:
        cfg["seed"] = seed
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] <= MASK64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    fields = TrainConfig.__dataclass_fields__
    try:
        return TrainConfig.from_dict({k: v for k, v in cfg.items() if k in fields})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def synth_configs(cfg: dict) -> tuple[SynthConfig, SynthConfig]:
    out = []
    for role in ("source", "target"):
        data = dict(cfg[f"synth_{role}"])
        if data.get("seed") is None:
            data["seed"] = derive_seed(cfg["seed"], "synth", role)
        try:
            out.append(SynthConfig(**data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    return out[0], out[1]


def load_pair(cfg: dict):
    paths = cfg["source_bundle"], cfg["target_bundle"]
    if (paths[0] is None) != (paths[1] is None):
        raise ConfigError("give both source_bundle and target_bundle, or neither")
    if paths[0] is None:
        return generate_synthetic_pair(*synth_configs(cfg))
    source, target = load_bundle(paths[0]), load_bundle(paths[1])
    if source.feature_dim != target.feature_dim or source.num_classes != target.num_classes:
        raise DataError("source and target bundles must share feature_dim and num_classes")
    return source, target


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _metrics_dict(metrics) -> dict | None:
    return None if metrics is None else metrics.to_dict()


def _load_trained(cfg, tc, source):
    if cfg["params"] is None:
        return None
    params = load_params(cfg["params"])
    if params.kind != tc.encoder.kind:
        raise ConfigError(f"params file holds a {params.kind} model but encoder.kind is {tc.encoder.kind}")
    if params["enc.w0"].shape[0] != source.feature_dim:
        raise DataError("params feature dimension does not match the bundles")
    return params


def cmd_train(cfg, out: Path) -> None:
    tc = train_config(cfg)
    source, target = load_pair(cfg)
    result = train(source, target, tc)
    save_params(result.params, out / "params.bin")
    write_history(result.history, out / "history.jsonl")
    encoder = tc.effective_encoder()
    _write_json(out / "metrics.json", {
        "target": result.final_metrics,
        "source": _metrics_dict(evaluate(result.params, source, encoder, encoder.prop_layers_source)),
        "sampled": result.sampled.stats(),
        "final_loss": {k: result.history[-1][k] for k in ("l_gc", "l_da", "l_sr", "total")}
        if result.history else None,
    })


def cmd_eval(cfg, out: Path) -> None:
    tc = train_config(cfg)
    if cfg["params"] is None:
        raise ConfigError("eval needs a 'params' path")
    source, target = load_pair(cfg)
    params = _load_trained(cfg, tc, source)
    encoder = tc.effective_encoder()
    _write_json(out / "metrics.json", {
        "target": _metrics_dict(evaluate(params, target, encoder, encoder.prop_layers_target)),
        "source": _metrics_dict(evaluate(params, source, encoder, encoder.prop_layers_source)),
    })


def cmd_sample(cfg, out: Path) -> None:
    tc = train_config(cfg)
    _, target = load_pair(cfg)
    sa = build_sampled_adjacency(target.graph, tc.effective_sampler())
    write_edges(out / "sampled_edges.tsv", sa.edges())
    _write_json(out / "stats.json", {**sa.stats(), "sampler": tc.effective_sampler().to_dict()})


def cmd_synth(cfg, out: Path) -> None:
    source, target = generate_synthetic_pair(*synth_configs(cfg))
    save_bundle(source, out / "source")
    save_bundle(target, out / "target")


def cmd_diag(cfg, out: Path) -> None:
    tc = train_config(cfg)
    source, target = load_pair(cfg)
    encoder = tc.effective_encoder()
    params = _load_trained(cfg, tc, source)
    if params is None:
        params = init_params(encoder, source.feature_dim, source.num_classes)
    d = cfg["diag"]
    hs = encode(source, params, encoder, encoder.prop_layers_source)
    ht = encode(target, params, encoder, encoder.prop_layers_target)
    r = d["r"]
    if r is None:
        # typical sup-norm gap between target feature vectors; 1.0 if degenerate
        r = median_inf_distance(target.features, seed=cfg["seed"]) or 1.0
    phi_s = estimate_smoothness(hs, source, d["k"], r)
    phi_t = estimate_smoothness(ht, target, d["k"], r)
    p, q = embedding_histograms(hs, ht)
    source_risk = None
    if source.labels is not None and source.labeled_mask().any():
        mask = source.labeled_mask()
        pred = predict(classify(hs, params))
        source_risk = float(np.mean(pred[mask] != source.labels[mask]))
    bound = bound_terms(
        gamma=d["gamma"], upsilon=d["upsilon"], phi_s=phi_s, phi_t=phi_t,
        discrepancy=tvd(p, q), mmd=mmd2(hs, ht, tc.kernel).value, xi=d["xi"],
        r=r, k=d["k"],
        m=source.num_nodes, n=target.num_nodes, d=source.feature_dim,
        source_risk=source_risk,
    )
    _write_json(out / "diagnostics.json", {
        "bound": bound.to_dict(),
        "smoothness": {"source": phi_s, "target": phi_t, "k": d["k"], "r": r},
        "census": {"source": motif_census(source.graph).to_dict(),
                   "target": motif_census(target.graph).to_dict()},
        "stats": {"source": source.stats(), "target": target.stats()},
    })


HANDLERS = {"train": cmd_train, "eval": cmd_eval, "sample": cmd_sample,
            "synth": cmd_synth, "diag": cmd_diag}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--output", type=Path, required=True)
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--seed", type=int, default=None)
        if name == "sample":
            # shorthands for the matching sampler.* overrides
            p.add_argument("--mode", choices=("khop", "rw"))
            p.add_argument("--k", type=int)
            p.add_argument("--walk-length", type=int)
            p.add_argument("--num-walks", type=int)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.override)
        if args.command == "sample":
            for flag, key in (("mode", "mode"), ("k", "k"), ("walk_length", "walk_length"),
                              ("num_walks", "num_walks")):
                value = getattr(args, flag)
                if value is not None:
                    overrides.append(f"sampler.{key}={json.dumps(value)}")
        cfg = resolve_config(args.config, overrides, args.seed)
        out = args.output
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, out)
        src_cfg, tgt_cfg = synth_configs(cfg)
        _write_json(out / "effective_config.json",
                    {**cfg, "synth_source": src_cfg.to_dict(), "synth_target": tgt_cfg.to_dict()})
    except ConfigError as exc:
        print(f"tdss: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"tdss: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TDSSError, OSError) as exc:
        print(f"tdss: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())
