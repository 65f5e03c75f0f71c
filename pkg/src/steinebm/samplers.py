"""Unadjusted Langevin dynamics, the CD baseline's transition kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel
from .numerics import RngStream, as_batch


@dataclass(frozen=True)
class LangevinConfig:
    step: float = 0.01
    steps: int = 1

    def __post_init__(self):
        if not self.step >= 0:
            raise ValueError("Langevin step must be nonnegative")
        if self.steps < 0:
            raise ValueError("Langevin steps must be >= 0")


def langevin_step(model: EnergyModel, theta, batch, step: float, rng: RngStream) -> np.ndarray:
    """``x' = x + step * grad f(x) + sqrt(2 step) * noise``, no Metropolis correction."""
    x = as_batch(batch, model.dim)
    noise = rng.normal(size=x.shape)
    if step == 0:
        return x.copy()
    return x + step * model.grad_x(theta, x) + np.sqrt(2.0 * step) * noise


def langevin_chain(model: EnergyModel, theta, batch, config: LangevinConfig, rng: RngStream) -> np.ndarray:
    x = as_batch(batch, model.dim).copy()
    for _ in range(config.steps):
        x = langevin_step(model, theta, x, config.step, rng)
    return x
