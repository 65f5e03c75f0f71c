"""Dense numeric substrate shared by every other module.

Points are 1-D float64 arrays, particle batches are ``(m, d)`` float64 arrays
and parameters are flat float64 vectors described by a :class:`ParamLayout`.
"""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterable, Mapping

import numpy as np

RNG_ALGORITHM = "numpy.Philox4x64-10"


def as_batch(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite ``(m, d)`` float64 batch; a 1-D input is one point."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a nonempty (m, d) batch, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"batch dimension {arr.shape[1]} does not match model dimension {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("batch contains non-finite entries")
    return arr


def logsumexp(values) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    vmax = v.max()
    if vmax == -np.inf:
        return -np.inf
    return float(vmax + np.log(np.sum(np.exp(v - vmax))))


def median(values) -> float:
    """Median; even-length inputs average the two central order statistics."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("median of an empty vector")
    return float(np.median(v))


def pairwise_sq_dists(batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


class ParamLayout:
    """Ordered mapping of named blocks onto a flat parameter vector."""

    def __init__(self, blocks: Mapping[str, tuple[int, ...]] | Iterable[tuple[str, tuple[int, ...]]]):
        items = blocks.items() if isinstance(blocks, Mapping) else blocks
        self.shapes: OrderedDict[str, tuple[int, ...]] = OrderedDict()
        self.slices: dict[str, slice] = {}
        offset = 0
        for name, shape in items:
            shape = tuple(int(s) for s in shape)
            size = int(np.prod(shape)) if shape else 1
            self.shapes[name] = shape
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def __eq__(self, other):
        return isinstance(other, ParamLayout) and self.shapes == other.shapes

    def __repr__(self):
        return f"ParamLayout({dict(self.shapes)})"

    def unpack(self, vec) -> dict[str, np.ndarray]:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape[-1] != self.size:
            raise ValueError(f"vector length {vec.shape[-1]} != layout size {self.size}")
        lead = vec.shape[:-1]
        return {name: vec[..., self.slices[name]].reshape(lead + shape) for name, shape in self.shapes.items()}

    def pack(self, blocks: Mapping[str, np.ndarray]) -> np.ndarray:
        parts = []
        for name, shape in self.shapes.items():
            arr = np.asarray(blocks[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"block {name!r} has shape {arr.shape}, expected {shape}")
            parts.append(arr.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def block(self, vec, name: str) -> np.ndarray:
        vec = np.asarray(vec)
        return vec[..., self.slices[name]].reshape(vec.shape[:-1] + self.shapes[name])


class RngStream:
    """Seeded random stream backed by numpy's counter-based Philox generator.

    Sampling methods (``normal``, ``uniform``, ``random``, ``permutation``, ...)
    are delegated to the underlying :class:`numpy.random.Generator`. A stream
    has a single owner; independent substreams come from :meth:`spawn`.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed)))

    def spawn(self, index: int) -> "RngStream":
        child = np.random.SeedSequence([self.seed, int(index)]).generate_state(1, np.uint64)[0]
        return RngStream(int(child))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def __getattr__(self, name):
        return getattr(self._gen, name)
