"""Neural sampler G(xi; eta): a tanh MLP with hand-written reverse-mode products,
and the two amortized-SVGD rules for training it."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyModel
from .kernels import KernelSpec
from .learners import OptimizerState, optimizer_step
from .numerics import ParamLayout, RngStream
from .svgd import phi_star


@dataclass
class MlpGenerator:
    """Fully connected generator: tanh hidden layers, identity output layer.

    ``layer_sizes`` lists the widths after the noise input and ends with the
    sample dimension. Weights are stored as ``W{i}`` with shape ``(out, in)``.
    """

    noise_dim: int
    layer_sizes: tuple[int, ...]
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.noise_dim < 1 or not self.layer_sizes or min(self.layer_sizes) < 1:
            raise ValueError("generator needs noise_dim >= 1 and positive layer sizes")
        blocks = []
        fan_in = self.noise_dim
        for i, width in enumerate(self.layer_sizes):
            blocks.append((f"W{i}", (width, fan_in)))
            blocks.append((f"b{i}", (width,)))
            fan_in = width
        self.layout = ParamLayout(blocks)
        if self.params is None:
            self.params = np.zeros(self.layout.size)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.layout.size,):
            raise ValueError(f"generator expects {self.layout.size} parameters, got {self.params.shape}")

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @classmethod
    def initialized(cls, noise_dim: int, layer_sizes, rng: RngStream, weight_std: float = 0.02) -> "MlpGenerator":
        """Weights ~ Normal(0, weight_std), biases zero."""
        gen = cls(noise_dim, tuple(layer_sizes))
        blocks = {}
        for name, shape in gen.layout.shapes.items():
            blocks[name] = rng.normal(0.0, weight_std, size=shape) if name.startswith("W") else np.zeros(shape)
        gen.params = gen.layout.pack(blocks)
        return gen

    def with_params(self, params) -> "MlpGenerator":
        return MlpGenerator(self.noise_dim, self.layer_sizes, np.array(params, dtype=np.float64))

    def spec(self) -> dict:
        return {"noise_dim": self.noise_dim, "layer_sizes": list(self.layer_sizes)}

    def sample_noise(self, rng: RngStream, n: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(n, self.noise_dim))

    def _weights(self):
        p = self.layout.unpack(self.params)
        return [(p[f"W{i}"], p[f"b{i}"]) for i in range(len(self.layer_sizes))]

    def _check_noise(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        single = xi.ndim == 1
        xi = np.atleast_2d(xi)
        if xi.shape[1] != self.noise_dim:
            raise ValueError(f"noise dimension {xi.shape[1]} != {self.noise_dim}")
        return xi, single

    def _forward_trace(self, xi):
        acts = [xi]
        layers = self._weights()
        a = xi
        for i, (W, b) in enumerate(layers):
            z = a @ W.T + b
            a = z if i == len(layers) - 1 else np.tanh(z)
            acts.append(a)
        return acts, layers

    def forward(self, xi) -> np.ndarray:
        xi, single = self._check_noise(xi)
        out = self._forward_trace(xi)[0][-1]
        return out[0] if single else out

    def vjp(self, xi, v) -> np.ndarray:
        """Gradient w.r.t. the parameters of ``sum_i G(xi_i)' v_i`` (flat, in ``layout`` order)."""
        xi, single = self._check_noise(xi)
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if v.shape != (xi.shape[0], self.out_dim):
            raise ValueError(f"cotangent shape {v.shape} does not match ({xi.shape[0]}, {self.out_dim})")
        acts, layers = self._forward_trace(xi)
        grads = {}
        delta = v
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            grads[f"W{i}"] = delta.T @ acts[i]
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ W) * (1.0 - acts[i] ** 2)
        return self.layout.pack(grads)


def gen_forward(gen: MlpGenerator, xi) -> np.ndarray:
    return gen.forward(xi)


def gen_vjp(gen: MlpGenerator, xi, v) -> np.ndarray:
    return gen.vjp(xi, v)


def amortized_direction(gen: MlpGenerator, model: EnergyModel, theta, xis, kernel: KernelSpec):
    """Back-propagated SVGD direction ``mean_i dG(xi_i)/deta . phi*(x_i)`` plus the samples."""
    x = gen.forward(xis)
    phi = phi_star(model, theta, x, kernel)
    return gen.vjp(xis, phi) / x.shape[0], x, phi


def amortized_update_chain(gen: MlpGenerator, model: EnergyModel, theta, xis, kernel: KernelSpec, step: float,
                           opt_state: OptimizerState | None = None):
    """Chain-rule amortized SVGD step on the generator.

    The per-particle directions are averaged rather than summed, so ``step`` does
    not scale with the batch. With ``opt_state=None`` a plain step is taken.
    Returns ``(new_gen, new_opt_state, samples)``.
    """
    direction, x, _ = amortized_direction(gen, model, theta, xis, kernel)
    if opt_state is None:
        opt_state = OptimizerState("sgd")
    opt_state, params = optimizer_step(opt_state, gen.params, direction, step)
    return gen.with_params(params), opt_state, x


def amortized_update_projection(gen: MlpGenerator, model: EnergyModel, theta, xis, kernel: KernelSpec, step: float,
                                inner_steps: int, inner_lr: float) -> MlpGenerator:
    """Fit the generator to the SVGD-moved targets ``x_i + step * phi*(x_i)``.

    Runs ``inner_steps`` of gradient descent on ``mean_i |G(xi_i) - t_i|^2`` with
    the targets frozen at their values under the current parameters.
    """
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    x = gen.forward(xis)
    targets = x + step * phi_star(model, theta, x, kernel)
    m = x.shape[0]
    for _ in range(inner_steps):
        resid = gen.forward(xis) - targets
        grad = 2.0 * gen.vjp(xis, resid) / m
        gen = gen.with_params(gen.params - inner_lr * grad)
    return gen
