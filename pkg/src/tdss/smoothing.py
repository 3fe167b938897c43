"""Degree-normalised Laplacian smoothing penalty on node representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError
from .numerics import as_dense
from .sampling import SampledAdjacency

__all__ = ["SmoothingResult", "l_sr", "normalized_sampled_operator"]


@dataclass(frozen=True, eq=False)
class SmoothingResult:
    value: float
    grad_h: np.ndarray


def _inv_sqrt_degrees(sa: SampledAdjacency) -> np.ndarray:
    deg = sa.degrees_tilde.astype(np.float64)
    out = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=out, where=deg > 0)
    return out


def normalized_sampled_operator(sa: SampledAdjacency) -> sp.csr_matrix:
    """``D~^-1/2 A~ D~^-1/2`` over the sampled adjacency (zero rows for isolated nodes)."""
    d = sp.diags(_inv_sqrt_degrees(sa))
    return sp.csr_matrix(d @ sa.matrix @ d)


def l_sr(h, sa: SampledAdjacency, reduction: str = "sum") -> SmoothingResult:
    """Smoothing loss ``1/2 sum_ij A~_ij ||h_i/sqrt(d_i) - h_j/sqrt(d_j)||^2`` and its gradient.

    Degrees come from the sampled adjacency; nodes with no sampled edge carry
    no term and receive a zero gradient.  Each unordered edge appears as two
    ordered pairs, so after the 1/2 it contributes its squared difference once.

    The gradient is ``2 (H_active - N H)`` with ``N`` the normalised sampled
    operator, i.e. twice the normalised Laplacian applied to ``H``.

    ``reduction="mean"`` divides value and gradient by the number of nodes,
    which puts the penalty on the same per-node scale as a mean classifier loss.
    """
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    h = as_dense(h)
    if h.shape[0] != sa.num_nodes:
        raise ShapeError("l_sr row mismatch", h.shape, sa.matrix.shape)
    inv = _inv_sqrt_degrees(sa)
    u = h * inv[:, None]
    coo = sa.matrix.tocoo()
    diff = u[coo.row] - u[coo.col]
    value = 0.5 * float(np.einsum("ij,ij->", diff, diff))

    active = (sa.degrees_tilde > 0)[:, None]
    grad = 2.0 * (np.where(active, h, 0.0) - inv[:, None] * (sa.matrix @ u))
    if reduction == "mean" and h.shape[0]:
        value /= h.shape[0]
        grad /= h.shape[0]
    return SmoothingResult(value, grad)
