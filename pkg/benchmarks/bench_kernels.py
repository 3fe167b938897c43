"""Time the compiled and pure-Python graph kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --nodes 2000 5000 --repeats 3

Prints one row per (kernel, size) with the median wall-clock of each backend
and the speed-up.  Outputs are compared for equality before timing.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np
import scipy.sparse as sp

from tdss import kernels
from tdss.synth import SynthConfig, generate_bundle


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _cases(n, seed):
    # keep average degree near 4 as n grows
    cfg = SynthConfig(num_nodes=n, motif_bias="star", intra_class_edge_prob=8.0 / n,
                      inter_class_edge_prob=2.0 / n, seed=seed)
    bundle = generate_bundle(cfg)
    g = bundle.graph
    ip, ix = g.indptr, g.indices
    h = np.random.default_rng(seed).normal(size=(n, 16))
    x = sp.csr_matrix(bundle.features)
    xi, xx = x.indptr.astype(np.int64), x.indices.astype(np.int64)
    return {
        "rw_sample_edges": lambda m: m.rw_sample_edges(ip, ix, n, 2, 3, seed),
        "khop_sample_edges(k=2)": lambda m: m.khop_sample_edges(ip, ix, n, 2),
        "count_triangles": lambda m: m.count_triangles(ip, ix, n),
        "smoothness_sup(k=2)": lambda m: m.smoothness_sup(ip, ix, h, xi, xx, x.data, 2, 0.5),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, nargs="+", default=[2000, 8000])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py, cy = kernels.get("python"), kernels.get("cython")
    print(f"{'kernel':<24}{'nodes':>8}{'python s':>12}{'cython s':>12}{'speed-up':>10}")
    for n in args.nodes:
        for name, call in _cases(n, args.seed).items():
            a, b = np.asarray(call(py)), np.asarray(call(cy))
            if not np.array_equal(a, b):
                raise SystemExit(f"{name}: backends disagree at n={n}")
            tp = _median_time(lambda: call(py), args.repeats)
            tc = _median_time(lambda: call(cy), args.repeats)
            print(f"{name:<24}{n:>8}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
