"""Parameter-update rules: MLE-style gradient, CD-k, SteinCD and Stein score matching.

All updates use the ascent convention: the direction returned by a rule is
*added* to theta (scaled by the optimizer). Negatives are treated as constants,
i.e. gradients never flow through the perturbation that produced them.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyModel
from .kernels import KernelSpec
from .numerics import RngStream, as_batch
from .samplers import LangevinConfig, langevin_chain
from .svgd import phi_star, svgd_run

MIN_FD_STEP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    theta_lr: float = 5e-4
    gen_lr: float = 1e-3
    svgd_step: float = 0.1
    svgd_steps: int = 1
    minibatch: int = 100
    iterations: int = 2000
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    langevin_step: float = 0.01
    langevin_steps: int = 1
    mix_alpha: float = 0.25
    discount: float = 0.7
    speedup_discount: float = 0.9
    ssm_variant: str = "one_sided"
    seed: int = 0

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ValueError("; ".join(f"{k}: {v}" for k, v in problems))

    def validate(self) -> list[tuple[str, str]]:
        bad = []
        if not self.theta_lr >= 0:
            bad.append(("theta_lr", "must be >= 0"))
        if not self.gen_lr >= 0:
            bad.append(("gen_lr", "must be >= 0"))
        if not self.svgd_step >= 0:
            bad.append(("svgd_step", "must be >= 0"))
        if self.svgd_steps < 1:
            bad.append(("svgd_steps", "must be >= 1"))
        if self.minibatch < 1:
            bad.append(("minibatch", "must be >= 1"))
        if self.iterations < 0:
            bad.append(("iterations", "must be >= 0"))
        if self.optimizer not in ("sgd", "adam"):
            bad.append(("optimizer", "must be 'sgd' or 'adam'"))
        if self.langevin_steps < 0:
            bad.append(("langevin_steps", "must be >= 0"))
        if not self.langevin_step >= 0:
            bad.append(("langevin_step", "must be >= 0"))
        for name in ("mix_alpha", "discount", "speedup_discount"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad.append((name, "must lie in [0, 1]"))
        if self.ssm_variant not in ("one_sided", "symmetric"):
            bad.append(("ssm_variant", "must be 'one_sided' or 'symmetric'"))
        return bad

    @property
    def langevin(self) -> LangevinConfig:
        return LangevinConfig(self.langevin_step, self.langevin_steps)


@dataclass
class OptimizerState:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    @classmethod
    def from_config(cls, config: TrainConfig) -> "OptimizerState":
        return cls(config.optimizer, config.adam_beta1, config.adam_beta2, config.adam_eps)


def optimizer_step(state: OptimizerState, theta, gradient, lr: float):
    """One ascent step; returns ``(new_state, new_theta)`` and leaves inputs untouched."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != theta.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameters {theta.shape}")
    if state.kind == "sgd":
        return replace(state, t=state.t + 1), theta + lr * g
    if state.kind != "adam":
        raise ValueError(f"unknown optimizer {state.kind!r}")
    m = np.zeros_like(theta) if state.m is None else state.m
    v = np.zeros_like(theta) if state.v is None else state.v
    t = state.t + 1
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_theta = theta + lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), new_theta


@dataclass
class UpdateResult:
    theta: np.ndarray
    opt_state: OptimizerState
    direction: np.ndarray
    negatives: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def mle_gradient(model: EnergyModel, theta, positives, negatives) -> np.ndarray:
    """mean grad_theta f over positives minus the same over negatives."""
    pos = as_batch(positives, model.dim)
    neg = as_batch(negatives, model.dim)
    return model.mean_grad_theta(theta, pos) - model.mean_grad_theta(theta, neg)


def _apply(model, theta, positives, negatives, config, opt_state):
    direction = mle_gradient(model, theta, positives, negatives)
    opt_state, new_theta = optimizer_step(opt_state, theta, direction, config.theta_lr)
    return UpdateResult(new_theta, opt_state, direction, negatives)


def cd_k_update(model: EnergyModel, theta, positives, config: TrainConfig, opt_state: OptimizerState,
                rng: RngStream) -> UpdateResult:
    """CD-k with ``config.langevin_steps`` unadjusted Langevin transitions as the perturbation."""
    negatives = langevin_chain(model, theta, positives, config.langevin, rng)
    return _apply(model, theta, positives, negatives, config, opt_state)


def steincd_negatives(model: EnergyModel, theta, positives, kernel: KernelSpec, step: float, n_steps: int = 1):
    return svgd_run(as_batch(positives, model.dim), model, theta, kernel, step, n_steps)


def steincd_update(model: EnergyModel, theta, positives, kernel: KernelSpec, config: TrainConfig,
                   opt_state: OptimizerState) -> UpdateResult:
    """SteinCD: negatives are the positives after ``config.svgd_steps`` SVGD steps (default one)."""
    negatives = steincd_negatives(model, theta, positives, kernel, config.svgd_step, config.svgd_steps)
    return _apply(model, theta, positives, negatives, config, opt_state)


def stein_score_matching_direction(model: EnergyModel, theta, positives, kernel: KernelSpec, step: float,
                                   variant: str = "one_sided", return_perturbed: bool = False):
    """Finite-difference estimate of ``-mean[grad_theta grad_x f(x) . phi*(x)]``.

    one_sided: ``(1/eps) mean[g(x) - g(x + eps phi)]``, i.e. the SteinCD direction over eps.
    symmetric: ``(1/2eps) mean[g(x - eps phi) - g(x + eps phi)]``.
    Here ``g = grad_theta f``. With ``return_perturbed`` the batch ``x + eps phi``
    is returned as well.
    """
    if abs(step) < MIN_FD_STEP:
        raise ValueError(f"finite-difference step {step!r} is below {MIN_FD_STEP} (cancellation)")
    x = as_batch(positives, model.dim)
    phi = phi_star(model, theta, x, kernel)
    forward = x + step * phi
    g_plus = model.mean_grad_theta(theta, forward)
    if variant == "one_sided":
        direction = (model.mean_grad_theta(theta, x) - g_plus) / step
    elif variant == "symmetric":
        direction = (model.mean_grad_theta(theta, x - step * phi) - g_plus) / (2.0 * step)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (direction, forward) if return_perturbed else direction


def stein_score_matching_update(model: EnergyModel, theta, positives, kernel: KernelSpec, config: TrainConfig,
                                opt_state: OptimizerState, variant: str | None = None) -> UpdateResult:
    variant = variant or config.ssm_variant
    direction, perturbed = stein_score_matching_direction(
        model, theta, positives, kernel, config.svgd_step, variant, return_perturbed=True
    )
    opt_state, new_theta = optimizer_step(opt_state, theta, direction, config.theta_lr)
    return UpdateResult(new_theta, opt_state, direction, perturbed, {"variant": variant})
