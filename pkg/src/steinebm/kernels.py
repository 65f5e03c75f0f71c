"""RBF and constant kernels with spatial gradients, plus the median bandwidth rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import median, pairwise_sq_dists

FALLBACK_BANDWIDTH = 1.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth policy.

    ``bandwidth=None`` selects the median heuristic; a positive float fixes it.
    The constant family ignores the bandwidth entirely.
    """

    family: str = "rbf"
    bandwidth: float | None = None

    def __post_init__(self):
        if self.family not in ("rbf", "constant"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("fixed bandwidth must be positive")

    def resolve_bandwidth(self, batch) -> float:
        if self.family == "constant":
            return FALLBACK_BANDWIDTH
        if self.bandwidth is not None:
            return float(self.bandwidth)
        return bandwidth_median_heuristic(batch)


def bandwidth_median_heuristic(batch) -> float:
    """med^2 / log(m) with med the median distinct-pair Euclidean distance.

    Degenerate batches (a single point, coincident points) fall back to 1.0.
    """
    x = np.asarray(batch, dtype=np.float64)
    m = x.shape[0]
    if m < 2:
        return FALLBACK_BANDWIDTH
    iu = np.triu_indices(m, k=1)
    dists = np.sqrt(pairwise_sq_dists(x)[iu])
    h = median(dists) ** 2 / np.log(m)
    if not np.isfinite(h) or h <= 0:
        return FALLBACK_BANDWIDTH
    return float(h)


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def kernel_eval(spec: KernelSpec, h: float, x, y) -> float:
    x, y = _check_pair(x, y)
    if spec.family == "constant":
        return 1.0
    return float(np.exp(-np.sum((x - y) ** 2) / h))


def kernel_grad_x(spec: KernelSpec, h: float, x, y) -> np.ndarray:
    x, y = _check_pair(x, y)
    if spec.family == "constant":
        return np.zeros_like(x)
    return -(2.0 / h) * (x - y) * kernel_eval(spec, h, x, y)


def kernel_matrix_with_grads(spec: KernelSpec, batch):
    """Return ``(K, G, h)`` with ``K[i, j] = k(x_i, x_j)`` and ``G[i, j] = grad_{x_i} k(x_i, x_j)``."""
    x = np.asarray(batch, dtype=np.float64)
    m, d = x.shape
    h = spec.resolve_bandwidth(x)
    if spec.family == "constant":
        return np.ones((m, m)), np.zeros((m, m, d)), h
    diff = x[:, None, :] - x[None, :, :]
    K = np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / h)
    G = -(2.0 / h) * diff * K[:, :, None]
    return K, G, h
