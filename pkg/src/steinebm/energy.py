"""Energy models p(x | theta) proportional to exp(f(x; theta)).

Every model works on flat parameter vectors ``theta`` and on ``(m, d)``
batches, returning per-sample values:

* ``f(theta, x)``          -> ``(m,)``
* ``grad_x(theta, x)``     -> ``(m, d)``
* ``grad_theta(theta, x)`` -> ``(m, P)`` in the model's :class:`ParamLayout`
* ``log_partition(theta)`` -> float, when it is available in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ParamLayout, RngStream, as_batch, logsumexp

MAX_ENUMERATED_HIDDEN = 25
_ENUM_CHUNK = 1 << 15


def _log_cosh2(a):
    # log(e^a + e^-a), overflow safe
    a = np.abs(a)
    return a + np.log1p(np.exp(-2.0 * a))


class EnergyModel:
    """Common surface for the energy models below."""

    kind = "abstract"
    dim: int
    layout: ParamLayout

    @property
    def n_params(self) -> int:
        return self.layout.size

    def f(self, theta, x) -> np.ndarray:
        raise NotImplementedError

    def grad_x(self, theta, x) -> np.ndarray:
        raise NotImplementedError

    def grad_theta(self, theta, x) -> np.ndarray:
        raise NotImplementedError

    def mean_grad_theta(self, theta, x) -> np.ndarray:
        return self.grad_theta(theta, x).mean(axis=0)

    def log_partition(self, theta) -> float:
        raise NotImplementedError(f"{self.kind} has no exact log-partition")

    @property
    def has_log_partition(self) -> bool:
        return False

    def spec(self) -> dict:
        return {"kind": self.kind, "d": self.dim}


@dataclass
class GBRBMParams:
    B: np.ndarray  # (d, l)
    b: np.ndarray  # (d,)
    c: np.ndarray  # (l,)

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @property
    def hidden(self) -> int:
        return self.B.shape[1]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.B), np.ravel(self.b), np.ravel(self.c)]).astype(np.float64)

    @classmethod
    def from_vector(cls, vec, d: int, hidden: int) -> "GBRBMParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (d * hidden + d + hidden,):
            raise ValueError(f"parameter vector of length {vec.size} does not fit d={d}, l={hidden}")
        B = vec[: d * hidden].reshape(d, hidden).copy()
        b = vec[d * hidden : d * hidden + d].copy()
        c = vec[d * hidden + d :].copy()
        return cls(B, b, c)


class GaussianBernoulliRBM(EnergyModel):
    """Gaussian-Bernoulli RBM with hidden units in {-1, +1}.

    Joint negative energy ``x'Bh + b'x + c'h - |x|^2/2``, so that the visible
    marginal is ``f(x) = b'x - |x|^2/2 + sum_i log(e^{a_i} + e^{-a_i})`` with
    ``a = B'x + c``. Parameter layout: ``B`` row-major, then ``b``, then ``c``.
    """

    kind = "gbrbm"

    def __init__(self, dim: int, hidden: int):
        if dim < 1 or hidden < 1:
            raise ValueError("RBM needs d >= 1 and l >= 1")
        self.dim = int(dim)
        self.hidden = int(hidden)
        self.layout = ParamLayout([("B", (self.dim, self.hidden)), ("b", (self.dim,)), ("c", (self.hidden,))])

    def spec(self) -> dict:
        return {"kind": self.kind, "d": self.dim, "hidden": self.hidden}

    def params(self, theta) -> GBRBMParams:
        return GBRBMParams.from_vector(theta, self.dim, self.hidden)

    def pack(self, params: GBRBMParams) -> np.ndarray:
        return params.to_vector()

    def init_theta(self, rng: RngStream, scale: float = 0.02) -> np.ndarray:
        """Couplings ~ Normal(0, scale), biases zero."""
        B = rng.normal(0.0, scale, size=(self.dim, self.hidden))
        return GBRBMParams(B, np.zeros(self.dim), np.zeros(self.hidden)).to_vector()

    def _unpack(self, theta):
        p = self.layout.unpack(theta)
        return p["B"], p["b"], p["c"]

    def f(self, theta, x):
        B, b, c = self._unpack(theta)
        x = as_batch(x, self.dim)
        a = x @ B + c
        return x @ b - 0.5 * np.sum(x * x, axis=1) + np.sum(_log_cosh2(a), axis=1)

    def grad_x(self, theta, x):
        B, b, c = self._unpack(theta)
        x = as_batch(x, self.dim)
        return b - x + np.tanh(x @ B + c) @ B.T

    def grad_theta(self, theta, x):
        B, b, c = self._unpack(theta)
        x = as_batch(x, self.dim)
        t = np.tanh(x @ B + c)
        gB = (x[:, :, None] * t[:, None, :]).reshape(x.shape[0], -1)
        return np.concatenate([gB, x, t], axis=1)

    def mean_grad_theta(self, theta, x):
        B, b, c = self._unpack(theta)
        x = as_batch(x, self.dim)
        m = x.shape[0]
        t = np.tanh(x @ B + c)
        return np.concatenate([(x.T @ t).ravel() / m, x.mean(axis=0), t.mean(axis=0)])

    @property
    def has_log_partition(self) -> bool:
        return self.hidden <= MAX_ENUMERATED_HIDDEN

    def log_partition(self, theta) -> float:
        """Exact log Z: integrate out x per hidden state, then sum over all 2^l states.

        ``log Z = (d/2) log(2 pi) + logsumexp_h [c'h + |b + Bh|^2 / 2]``.
        """
        if self.hidden > MAX_ENUMERATED_HIDDEN:
            raise ValueError(f"exact log Z enumerates 2^l states; l={self.hidden} exceeds {MAX_ENUMERATED_HIDDEN}")
        B, b, c = self._unpack(theta)
        n_states = 1 << self.hidden
        bits = np.arange(self.hidden, dtype=np.int64)
        partial = []
        for start in range(0, n_states, _ENUM_CHUNK):
            idx = np.arange(start, min(start + _ENUM_CHUNK, n_states), dtype=np.int64)
            h = ((idx[:, None] >> bits) & 1) * 2.0 - 1.0
            mean = b + h @ B.T
            partial.append(logsumexp(h @ c + 0.5 * np.sum(mean * mean, axis=1)))
        return 0.5 * self.dim * np.log(2.0 * np.pi) + logsumexp(partial)

    def gibbs_sample(self, theta, n: int, burn_in: int, thin: int, rng: RngStream, n_chains: int | None = None) -> np.ndarray:
        """Block Gibbs sampling alternating h | x and x | h.

        ``p(h_i = +1 | x) = logistic(2 (B'x + c)_i)`` and ``x | h ~ Normal(b + Bh, I)``.
        ``n_chains`` parallel chains (default ``min(n, 100)``) start at ``Normal(b, I)``,
        run ``burn_in`` sweeps, then contribute one sample every ``thin + 1`` sweeps.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        B, b, c = self._unpack(theta)
        chains = min(n, 100) if n_chains is None else int(n_chains)
        x = b + rng.normal(size=(chains, self.dim))

        def sweep(x):
            a = x @ B + c
            p_plus = 0.5 * (1.0 + np.tanh(a))  # logistic(2a)
            h = np.where(rng.random(size=a.shape) < p_plus, 1.0, -1.0)
            return b + h @ B.T + rng.normal(size=x.shape)

        for _ in range(burn_in):
            x = sweep(x)
        out = []
        collected = 0
        while collected < n:
            x = sweep(x)
            out.append(x)
            collected += chains
            for _ in range(thin):
                x = sweep(x)
        return np.concatenate(out, axis=0)[:n]


class DiagonalGaussian(EnergyModel):
    """Diagonal Gaussian, theta = [mean | log_var]; closed-form everything."""

    kind = "diag_gaussian"

    def __init__(self, dim: int):
        self.dim = int(dim)
        self.layout = ParamLayout([("mean", (self.dim,)), ("log_var", (self.dim,))])

    def init_theta(self, rng: RngStream | None = None, scale: float = 0.0) -> np.ndarray:
        return np.zeros(2 * self.dim)

    def _unpack(self, theta):
        p = self.layout.unpack(theta)
        return p["mean"], p["log_var"]

    def f(self, theta, x):
        mu, lv = self._unpack(theta)
        x = as_batch(x, self.dim)
        return -0.5 * np.sum((x - mu) ** 2 * np.exp(-lv), axis=1)

    def grad_x(self, theta, x):
        mu, lv = self._unpack(theta)
        x = as_batch(x, self.dim)
        return -(x - mu) * np.exp(-lv)

    def grad_theta(self, theta, x):
        mu, lv = self._unpack(theta)
        x = as_batch(x, self.dim)
        r = x - mu
        return np.concatenate([r * np.exp(-lv), 0.5 * r * r * np.exp(-lv)], axis=1)

    @property
    def has_log_partition(self) -> bool:
        return True

    def log_partition(self, theta) -> float:
        _, lv = self._unpack(theta)
        return float(0.5 * self.dim * np.log(2.0 * np.pi) + 0.5 * np.sum(lv))

    def grad_log_partition(self, theta) -> np.ndarray:
        return np.concatenate([np.zeros(self.dim), np.full(self.dim, 0.5)])

    def sample(self, theta, n: int, rng: RngStream) -> np.ndarray:
        mu, lv = self._unpack(theta)
        return mu + np.exp(0.5 * lv) * rng.normal(size=(n, self.dim))


class QuadraticModel(EnergyModel):
    """One-dimensional ``f(x; theta) = -theta x^2 / 2``; cross-derivative is ``-x``."""

    kind = "quadratic"

    def __init__(self):
        self.dim = 1
        self.layout = ParamLayout([("precision", ())])

    def f(self, theta, x):
        x = as_batch(x, 1)
        return -0.5 * theta[0] * x[:, 0] ** 2

    def grad_x(self, theta, x):
        x = as_batch(x, 1)
        return -theta[0] * x

    def grad_theta(self, theta, x):
        x = as_batch(x, 1)
        return -0.5 * x**2

    def cross_derivative(self, theta, x) -> np.ndarray:
        """d/dtheta d/dx f, shape ``(m, P, d)``."""
        x = as_batch(x, 1)
        return -x[:, None, :]

    @property
    def has_log_partition(self) -> bool:
        return True

    def log_partition(self, theta) -> float:
        if theta[0] <= 0:
            raise ValueError("quadratic model is normalizable only for theta > 0")
        return float(0.5 * np.log(2.0 * np.pi / theta[0]))


class GaussianMixtureEnergy(EnergyModel):
    """Fixed equal-weight isotropic Gaussian mixture; no learnable parameters."""

    kind = "mixture"

    def __init__(self, centers, std: float):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if std <= 0:
            raise ValueError("component std must be positive")
        self.std = float(std)
        self.dim = self.centers.shape[1]
        self.layout = ParamLayout([])

    def spec(self) -> dict:
        return {"kind": self.kind, "d": self.dim, "centers": self.centers.tolist(), "std": self.std}

    def init_theta(self, rng=None, scale: float = 0.0) -> np.ndarray:
        return np.zeros(0)

    def _log_terms(self, x):
        diff = x[:, None, :] - self.centers[None, :, :]
        return -0.5 * np.sum(diff * diff, axis=2) / self.std**2, diff

    def f(self, theta, x):
        x = as_batch(x, self.dim)
        lt, _ = self._log_terms(x)
        mx = lt.max(axis=1, keepdims=True)
        return (mx + np.log(np.sum(np.exp(lt - mx), axis=1, keepdims=True)))[:, 0]

    def grad_x(self, theta, x):
        x = as_batch(x, self.dim)
        lt, diff = self._log_terms(x)
        w = np.exp(lt - lt.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        return -np.einsum("mk,mkd->md", w, diff) / self.std**2

    def grad_theta(self, theta, x):
        x = as_batch(x, self.dim)
        return np.zeros((x.shape[0], 0))

    @property
    def has_log_partition(self) -> bool:
        return True

    def log_partition(self, theta) -> float:
        return float(np.log(len(self.centers)) + 0.5 * self.dim * np.log(2.0 * np.pi * self.std**2))


def ring_centers(n_modes: int = 8, radius: float = 4.0) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(n_modes) / n_modes
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def model_from_spec(spec: dict) -> EnergyModel:
    kind = spec.get("kind")
    if kind == "gbrbm":
        return GaussianBernoulliRBM(spec["d"], spec["hidden"])
    if kind == "diag_gaussian":
        return DiagonalGaussian(spec["d"])
    if kind == "quadratic":
        return QuadraticModel()
    if kind == "mixture":
        return GaussianMixtureEnergy(spec["centers"], spec["std"])
    raise ValueError(f"unknown model kind {kind!r}")
