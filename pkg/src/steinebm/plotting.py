"""Report figures written next to the metrics CSVs."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}


def _finite(values):
    return [v if v is not None and math.isfinite(v) else np.nan for v in values]


def plot_metrics(metrics, path, title: str | None = None):
    """Learning curves: held-out log-likelihood and Stein discrepancy against iteration."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.5))
        its = [r.iteration for r in metrics]
        ax1.plot(its, _finite([r.test_ll for r in metrics]), marker="o", ms=3)
        ax1.set_xlabel("iteration")
        ax1.set_ylabel("test log-likelihood (nats)")
        ax2.semilogy(its, _finite([r.stein_disc for r in metrics]), marker="o", ms=3, color="C1")
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("Stein discrepancy")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_curves(curves: dict, path, ylabel: str = "test log-likelihood (nats)"):
    """Overlay several ``{label: (iterations, values)}`` curves."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (its, vals) in curves.items():
            ax.plot(its, _finite(vals), label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_sweep(param: str, values, finals, path, ylabel: str = "final test log-likelihood (nats)"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(values, _finite(finals), marker="s")
        ax.set_xlabel(param)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_samples(samples, path, centers=None, title: str | None = None):
    x = np.asarray(samples)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(x[:, 0], x[:, 1] if x.shape[1] > 1 else np.zeros(len(x)), s=4, alpha=0.5)
        if centers is not None:
            c = np.asarray(centers)
            ax.scatter(c[:, 0], c[:, 1], marker="x", color="k")
        ax.set_aspect("equal", adjustable="datalim")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
