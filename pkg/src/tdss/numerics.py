"""Dense and sparse matrix kernels.

Dense matrices are plain ``float64`` numpy arrays; sparse matrices are
``scipy.sparse.csr_matrix`` instances with sorted column indices.  The helpers
here only add the shape checks and canonicalisation the rest of the package
relies on.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError

__all__ = [
    "as_dense",
    "as_csr",
    "densify",
    "matmul",
    "spmm",
    "row_softmax",
    "sparse_equal",
]


def as_dense(a) -> np.ndarray:
    """Return ``a`` as a 2-D C-contiguous float64 array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={out.ndim}")
    return out


def as_csr(s, shape=None) -> sp.csr_matrix:
    """Canonical CSR copy: float64, duplicates summed, sorted columns, no explicit zeros."""
    if sp.issparse(s):
        out = sp.csr_matrix(s, dtype=np.float64, copy=True)
    else:
        out = sp.csr_matrix(np.asarray(s, dtype=np.float64), shape=shape)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    if not np.all(np.isfinite(out.data)):
        raise ValueError("sparse matrix has non-finite entries")
    return out


def densify(s) -> np.ndarray:
    return np.asarray(s.toarray(), dtype=np.float64)


def matmul(a, b) -> np.ndarray:
    """Dense product ``a @ b`` with a shape check that reports both operands."""
    a = as_dense(a)
    b = as_dense(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul dimension mismatch", a.shape, b.shape)
    return a @ b


def spmm(s, d) -> np.ndarray:
    """Sparse-times-dense product."""
    d = as_dense(d)
    if s.shape[1] != d.shape[0]:
        raise ShapeError("spmm dimension mismatch", s.shape, d.shape)
    return np.asarray(s @ d, dtype=np.float64)


def row_softmax(m) -> np.ndarray:
    """Numerically stable softmax along each row (max-subtracted)."""
    m = as_dense(m)
    z = m - m.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def sparse_equal(a, b) -> bool:
    """Structural and numerical equality of two sparse matrices."""
    if a.shape != b.shape:
        return False
    return (abs(as_csr(a) - as_csr(b))).nnz == 0
