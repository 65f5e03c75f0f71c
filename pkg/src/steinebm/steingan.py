"""SteinGAN (amortized MLE), SteinCD-GAN(alpha) mixing and the training loop driver."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .energy import EnergyModel
from .evaluation import MetricsRecord, avg_pairwise_distance, mode_coverage, moment_gap, test_log_likelihood
from .generator import MlpGenerator, amortized_update_chain
from .kernels import KernelSpec
from .learners import (
    OptimizerState,
    TrainConfig,
    cd_k_update,
    optimizer_step,
    stein_score_matching_update,
    steincd_update,
)
from .numerics import RngStream, as_batch
from .svgd import stein_discrepancy_diag

METHODS = ("steincd", "cd", "ssm", "steingan", "mix")

# substream indices under the run seed
_DATA_STREAM, _NOISE_STREAM, _MIX_STREAM, _CHAIN_STREAM = 0, 1, 2, 3


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite parameters at iteration {iteration}")
        self.iteration = iteration


@dataclass
class SteinGanState:
    theta: np.ndarray
    gen: MlpGenerator | None
    theta_opt: OptimizerState
    gen_opt: OptimizerState
    config: TrainConfig
    rng_noise: RngStream
    rng_mix: RngStream
    rng_chain: RngStream
    iteration: int = 0

    @classmethod
    def create(cls, theta, gen: MlpGenerator | None, config: TrainConfig) -> "SteinGanState":
        root = RngStream(config.seed)
        return cls(
            theta=np.array(theta, dtype=np.float64),
            gen=gen,
            theta_opt=OptimizerState.from_config(config),
            gen_opt=OptimizerState.from_config(config),
            config=config,
            rng_noise=root.spawn(_NOISE_STREAM),
            rng_mix=root.spawn(_MIX_STREAM),
            rng_chain=root.spawn(_CHAIN_STREAM),
        )


@dataclass
class IterationInfo:
    kind: str
    negatives: np.ndarray | None
    direction: np.ndarray
    discount: float = math.nan


def discounted_direction(model: EnergyModel, theta, positives, negatives, discount: float) -> np.ndarray:
    """``mean grad_theta f(x+) - (1 - discount) mean grad_theta f(x-)``."""
    return model.mean_grad_theta(theta, as_batch(positives, model.dim)) - (1.0 - discount) * model.mean_grad_theta(
        theta, as_batch(negatives, model.dim)
    )


def theta_update_discounted(model: EnergyModel, theta, positives, negatives, discount: float, lr: float,
                            opt_state: OptimizerState):
    """Returns ``(new_theta, new_opt_state, direction)``."""
    direction = discounted_direction(model, theta, positives, negatives, discount)
    opt_state, new_theta = optimizer_step(opt_state, theta, direction, lr)
    return new_theta, opt_state, direction


def speedup_triggered(model: EnergyModel, theta, positives, negatives) -> bool:
    # f is the negative energy: real data has higher energy iff its mean f is lower.
    return bool(np.mean(model.f(theta, positives)) < np.mean(model.f(theta, negatives)))


def steingan_iteration(state: SteinGanState, model: EnergyModel, kernel: KernelSpec, minibatch):
    """One amortized-MLE iteration: generator step, then the discounted theta step."""
    if state.gen is None:
        raise ValueError("SteinGAN needs a generator")
    cfg = state.config
    positives = as_batch(minibatch, model.dim)
    xis = state.gen.sample_noise(state.rng_noise, positives.shape[0])
    gen, gen_opt, negatives = amortized_update_chain(
        state.gen, model, state.theta, xis, kernel, cfg.gen_lr, state.gen_opt
    )
    discount = cfg.speedup_discount if speedup_triggered(model, state.theta, positives, negatives) else cfg.discount
    theta, theta_opt, direction = theta_update_discounted(
        model, state.theta, positives, negatives, discount, cfg.theta_lr, state.theta_opt
    )
    new_state = replace(state, theta=theta, theta_opt=theta_opt, gen=gen, gen_opt=gen_opt,
                        iteration=state.iteration + 1)
    return new_state, IterationInfo("steingan", negatives, direction, discount)


def _steincd_iteration(state: SteinGanState, model, kernel, minibatch):
    res = steincd_update(model, state.theta, minibatch, kernel, state.config, state.theta_opt)
    new_state = replace(state, theta=res.theta, theta_opt=res.opt_state, iteration=state.iteration + 1)
    return new_state, IterationInfo("steincd", res.negatives, res.direction)


def steincd_gan_mix_iteration(state: SteinGanState, model: EnergyModel, kernel: KernelSpec, minibatch,
                              alpha: float | None = None):
    """With probability alpha a SteinCD theta step (generator untouched), else a SteinGAN iteration.

    The Bernoulli draw always consumes exactly one value of the mixing stream.
    """
    alpha = state.config.mix_alpha if alpha is None else alpha
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    u = state.rng_mix.random()
    if u < alpha:
        return _steincd_iteration(state, model, kernel, minibatch)
    return steingan_iteration(state, model, kernel, minibatch)


def run_iteration(method: str, state: SteinGanState, model: EnergyModel, kernel: KernelSpec, minibatch):
    if method == "steincd":
        return _steincd_iteration(state, model, kernel, minibatch)
    if method == "cd":
        res = cd_k_update(model, state.theta, minibatch, state.config, state.theta_opt, state.rng_chain)
        return (replace(state, theta=res.theta, theta_opt=res.opt_state, iteration=state.iteration + 1),
                IterationInfo("cd", res.negatives, res.direction))
    if method == "ssm":
        res = stein_score_matching_update(model, state.theta, minibatch, kernel, state.config, state.theta_opt)
        return (replace(state, theta=res.theta, theta_opt=res.opt_state, iteration=state.iteration + 1),
                IterationInfo("ssm", res.negatives, res.direction))
    if method == "steingan":
        return steingan_iteration(state, model, kernel, minibatch)
    if method == "mix":
        return steincd_gan_mix_iteration(state, model, kernel, minibatch)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


class MinibatchStream:
    """Epoch-shuffled minibatches; a trailing partial batch is dropped."""

    def __init__(self, data, size: int, rng: RngStream):
        self.data = data
        self.size = min(size, data.shape[0])
        self.rng = rng
        self._order = np.zeros(0, dtype=np.int64)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos + self.size > self._order.size:
            self._order = self.rng.permutation(self.data.shape[0])
            self._pos = 0
        idx = self._order[self._pos : self._pos + self.size]
        self._pos += self.size
        return self.data[idx]


def train(model: EnergyModel, dataset, config: TrainConfig, method: str = "steincd", kernel: KernelSpec | None = None,
          theta0=None, gen: MlpGenerator | None = None, testset=None, cadence: int = 100,
          mode_centers: Sequence | None = None, mode_radius: float | None = None, callback=None):
    """Run ``config.iterations`` iterations of ``method`` and collect metrics.

    A metrics row is recorded after iteration ``t`` whenever ``t % cadence == 0``
    and after the final iteration. Raises :class:`DivergenceError` when theta
    stops being finite.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    data = as_batch(dataset)
    if data.shape[1] != model.dim:
        raise ValueError(f"dataset dimension {data.shape[1]} does not match model dimension {model.dim}")
    if gen is not None and gen.out_dim != model.dim:
        raise ValueError(f"generator output dimension {gen.out_dim} does not match model dimension {model.dim}")
    if method in ("steingan", "mix") and gen is None:
        raise ValueError(f"method {method!r} requires a generator")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    kernel = kernel or KernelSpec()
    if theta0 is None:
        theta0 = model.init_theta(RngStream(config.seed).spawn(4))
    state = SteinGanState.create(theta0, gen, config)
    batches = MinibatchStream(data, config.minibatch, RngStream(config.seed).spawn(_DATA_STREAM))
    test = None if testset is None else as_batch(testset, model.dim)
    metrics: list[MetricsRecord] = []
    start = time.perf_counter()
    for t in range(1, config.iterations + 1):
        positives = batches.next()
        state, info = run_iteration(method, state, model, kernel, positives)
        if not np.all(np.isfinite(state.theta)):
            raise DivergenceError(t)
        if callback is not None:
            callback(state, info)
        if t % cadence == 0 or t == config.iterations:
            metrics.append(_record(t, model, state.theta, positives, info, test, kernel, mode_centers, mode_radius,
                                   int((time.perf_counter() - start) * 1000)))
    return state, metrics


def _record(t, model, theta, positives, info, test, kernel, centers, radius, wall_ms) -> MetricsRecord:
    rec = MetricsRecord(iteration=t, wall_ms=wall_ms)
    if test is not None and model.has_log_partition:
        rec.test_ll = test_log_likelihood(model, theta, test)
    ref = test[:200] if test is not None else positives
    if ref.shape[0] >= 2:
        rec.stein_disc = stein_discrepancy_diag(model, theta, ref, kernel if kernel.family == "rbf" else KernelSpec())
    rec.mean_f_real = float(np.mean(model.f(theta, positives)))
    neg = info.negatives
    if neg is not None:
        rec.moment_gap = moment_gap(model, theta, positives, neg)
        rec.mean_f_fake = float(np.mean(model.f(theta, neg)))
        if neg.shape[0] >= 2:
            rec.avg_pair_dist = avg_pairwise_distance(neg)
        if centers is not None and radius is not None:
            rec.mode_coverage = mode_coverage(neg, centers, radius)
    return rec
