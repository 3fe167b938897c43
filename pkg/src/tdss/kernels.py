"""Backend selection for the hot graph kernels.

The compiled extension ``tdss._kernels`` is used when it imports; otherwise,
or when the environment variable ``TDSS_PURE_PYTHON`` is set to a non-empty
value, the pure-Python ``tdss._fallback`` module is used.  Both expose the
same functions with identical results.
"""

from __future__ import annotations

import contextlib
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

if os.environ.get("TDSS_PURE_PYTHON") or _compiled is None:
    _impl = _fallback
else:
    _impl = _compiled


def backend_name() -> str:
    return "cython" if _impl is _compiled else "python"


def get(name: str):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily route every kernel call through the named backend."""
    global _impl
    previous = _impl
    _impl = get(name)
    try:
        yield _impl
    finally:
        _impl = previous


def bfs_within(indptr, indices, source, k):
    return _impl.bfs_within(indptr, indices, source, k)


def rw_visits(indptr, indices, v, walk_length, num_walks, seed):
    return _impl.rw_visits(indptr, indices, v, walk_length, num_walks, seed)


def rw_sample_edges(indptr, indices, n, walk_length, num_walks, seed):
    return _impl.rw_sample_edges(indptr, indices, n, walk_length, num_walks, seed)


def khop_sample_edges(indptr, indices, n, k):
    return _impl.khop_sample_edges(indptr, indices, n, k)


def count_triangles(indptr, indices, n):
    return int(_impl.count_triangles(indptr, indices, n))


def smoothness_sup(indptr, indices, h, x_indptr, x_indices, x_data, k, r):
    return _impl.smoothness_sup(indptr, indices, h, x_indptr, x_indices, x_data, k, r)
