"""Directory-based plain-text bundle format.

Layout::

    meta.json      {"num_nodes": int, "feature_dim": int, "num_classes": int, "name": str}
    edges.tsv      "u<TAB>v" per undirected edge, 0-indexed, u < v, sorted
    features.tsv   "node<TAB>dim<TAB>value" triplets sorted by (node, dim)
    labels.tsv     "node<TAB>label" (optional)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BundleFormatError, DataError
from .graph import Graph, GraphBundle

__all__ = ["load_bundle", "save_bundle", "write_edges"]

_META_KEYS = {"num_nodes": int, "feature_dim": int, "num_classes": int, "name": str}


def _read_meta(path: Path) -> dict:
    try:
        meta = json.loads(path.read_text())
    except FileNotFoundError:
        raise BundleFormatError(path, "missing file") from None
    except json.JSONDecodeError as exc:
        raise BundleFormatError(path, f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(meta, dict):
        raise BundleFormatError(path, "expected a JSON object")
    for key, typ in _META_KEYS.items():
        if key not in meta:
            raise BundleFormatError(path, f"missing key {key!r}")
        if not isinstance(meta[key], typ) or isinstance(meta[key], bool):
            raise BundleFormatError(path, f"key {key!r} must be {typ.__name__}")
    for key in ("num_nodes", "feature_dim", "num_classes"):
        if meta[key] < 0:
            raise BundleFormatError(path, f"key {key!r} must be nonnegative")
    return meta


def _rows(path: Path, width: int, required: bool = True):
    """Yield ``(lineno, fields)`` for a TSV file with exactly ``width`` columns."""
    try:
        fh = path.open()
    except FileNotFoundError:
        if required:
            raise BundleFormatError(path, "missing file") from None
        return
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            parts = line.split("\t")
            if len(parts) != width:
                raise BundleFormatError(path, f"expected {width} tab-separated fields", lineno)
            yield lineno, parts


def _int_field(path, lineno, text, upper, what):
    try:
        value = int(text)
    except ValueError:
        raise BundleFormatError(path, f"{what} {text!r} is not an integer", lineno) from None
    if not 0 <= value < upper:
        raise BundleFormatError(path, f"{what} {value} out of range [0, {upper})", lineno)
    return value


def load_bundle(directory) -> GraphBundle:
    """Read and validate a bundle directory.

    Self-loops and duplicate edges are rejected with the offending line.
    """
    root = Path(directory)
    meta = _read_meta(root / "meta.json")
    n, dim, n_cls = meta["num_nodes"], meta["feature_dim"], meta["num_classes"]

    path = root / "edges.tsv"
    seen = {}
    for lineno, (a, b) in _rows(path, 2):
        u = _int_field(path, lineno, a, n, "node")
        v = _int_field(path, lineno, b, n, "node")
        if u == v:
            raise BundleFormatError(path, f"self-loop on node {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise BundleFormatError(
                path, f"duplicate edge {key[0]}-{key[1]} (first on line {seen[key]})", lineno
            )
        seen[key] = lineno
    edges = np.array(list(seen), dtype=np.int64).reshape(-1, 2)
    graph = Graph.from_edges(n, edges)

    path = root / "features.tsv"
    rows, cols, vals = [], [], []
    fseen = set()
    for lineno, (a, b, c) in _rows(path, 3):
        i = _int_field(path, lineno, a, n, "node")
        j = _int_field(path, lineno, b, dim, "dim")
        try:
            x = float(c)
        except ValueError:
            raise BundleFormatError(path, f"value {c!r} is not a number", lineno) from None
        if not np.isfinite(x):
            raise BundleFormatError(path, f"non-finite value {c!r}", lineno)
        if (i, j) in fseen:
            raise BundleFormatError(path, f"duplicate entry ({i}, {j})", lineno)
        fseen.add((i, j))
        rows.append(i)
        cols.append(j)
        vals.append(x)
    features = sp.csr_matrix((vals, (rows, cols)), shape=(n, dim), dtype=np.float64)
    features.eliminate_zeros()
    features.sort_indices()

    path = root / "labels.tsv"
    labels = None
    for lineno, (a, b) in _rows(path, 2, required=False):
        if labels is None:
            labels = np.full(n, -1, dtype=np.int64)
        i = _int_field(path, lineno, a, n, "node")
        y = _int_field(path, lineno, b, n_cls, "label")
        if labels[i] >= 0:
            raise BundleFormatError(path, f"node {i} labelled twice", lineno)
        labels[i] = y

    try:
        return GraphBundle(graph, features, labels, n_cls, meta["name"])
    except DataError as exc:
        raise BundleFormatError(root, str(exc)) from None


def write_edges(path, edges) -> None:
    """Write canonical ``u<TAB>v`` lines (u < v, lexicographic order)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = np.sort(e, axis=1)
    e = e[np.lexsort((e[:, 1], e[:, 0]))]
    with open(path, "w") as fh:
        fh.writelines(f"{u}\t{v}\n" for u, v in e.tolist())


def save_bundle(bundle: GraphBundle, directory) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": bundle.num_nodes,
        "feature_dim": bundle.feature_dim,
        "num_classes": bundle.num_classes,
        "name": bundle.name,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    write_edges(root / "edges.tsv", bundle.graph.edges())

    coo = bundle.features.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(root / "features.tsv", "w") as fh:
        fh.writelines(
            f"{i}\t{j}\t{x!r}\n"
            for i, j, x in zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist())
        )

    labels_path = root / "labels.tsv"
    if bundle.labels is not None:
        with open(labels_path, "w") as fh:
            fh.writelines(f"{i}\t{y}\n" for i, y in enumerate(bundle.labels.tolist()) if y >= 0)
    elif labels_path.exists():
        labels_path.unlink()
    return root
