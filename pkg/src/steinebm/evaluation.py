"""Exact and statistical evaluation metrics."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .energy import EnergyModel
from .numerics import as_batch, pairwise_sq_dists

CSV_HEADER = "iter,test_ll,stein_disc,moment_gap,mode_coverage,avg_pair_dist,mean_f_real,mean_f_fake,wall_ms"


def test_log_likelihood(model: EnergyModel, theta, testset) -> float:
    """Mean log-density of the test points in nats: ``mean f(x) - log Z``."""
    if not model.has_log_partition:
        raise ValueError(f"model {model.kind!r} has no exact log-partition")
    x = as_batch(testset, model.dim)
    return float(np.mean(model.f(theta, x)) - model.log_partition(theta))


test_log_likelihood.__test__ = False  # keep pytest from collecting it


def moment_gap(model: EnergyModel, theta, data, model_samples) -> float:
    gap = model.mean_grad_theta(theta, as_batch(data, model.dim)) - model.mean_grad_theta(
        theta, as_batch(model_samples, model.dim)
    )
    return float(np.linalg.norm(gap))


def mode_coverage(samples, mode_centers, radius: float) -> float:
    """Fraction of centers with at least one sample within ``radius``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(mode_centers, dtype=np.float64))
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return float(np.mean(np.any(d2 <= radius**2, axis=0)))


def avg_pairwise_distance(samples) -> float:
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m = x.shape[0]
    if m < 2:
        raise ValueError("average pairwise distance needs at least two samples")
    iu = np.triu_indices(m, k=1)
    return float(np.mean(np.sqrt(pairwise_sq_dists(x)[iu])))


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


@dataclass
class MetricsRecord:
    iteration: int
    test_ll: float = math.nan
    stein_disc: float = math.nan
    moment_gap: float = math.nan
    mode_coverage: float = math.nan
    avg_pair_dist: float = math.nan
    mean_f_real: float = math.nan
    mean_f_fake: float = math.nan
    wall_ms: int = 0

    def to_csv_row(self) -> str:
        return ",".join(_fmt(v) for v in astuple(self))

    @classmethod
    def from_csv_row(cls, row: str) -> "MetricsRecord":
        parts = row.strip().split(",")
        names = [f.name for f in fields(cls)]
        if len(parts) != len(names):
            raise ValueError(f"expected {len(names)} columns, got {len(parts)}")
        vals = {}
        for name, p in zip(names, parts):
            vals[name] = int(p) if name in ("iteration", "wall_ms") else float(p)
        return cls(**vals)

    @property
    def diverged(self) -> bool:
        return not all(math.isfinite(v) or math.isnan(v) for v in astuple(self))
