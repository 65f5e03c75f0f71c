"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly as ``python tests/test_acceptance.py``.
"""
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import central_diff, rel_err  # noqa: E402

from steinebm import (  # noqa: E402
    DiagonalGaussian,
    GaussianBernoulliRBM,
    GaussianMixtureEnergy,
    KernelSpec,
    MlpGenerator,
    QuadraticModel,
    TrainConfig,
    train,
)
from steinebm.cli import main as cli_main  # noqa: E402
from steinebm.data_io import make_gaussian_mixture, make_rbm_ground_truth  # noqa: E402
from steinebm.energy import ring_centers  # noqa: E402
from steinebm.evaluation import avg_pairwise_distance, mode_coverage  # noqa: E402
from steinebm.evaluation import test_log_likelihood as heldout_ll  # noqa: E402
from steinebm.learners import stein_score_matching_direction  # noqa: E402
from steinebm.numerics import RngStream  # noqa: E402
from steinebm.steingan import discounted_direction  # noqa: E402
from steinebm.svgd import phi_star, stein_discrepancy_diag, svgd_run  # noqa: E402

RESULTS: list[str] = []


def report(num, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {budget:.0f}s]"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rbm_benchmark(seed):
    """Ground-truth RBM d=4, l=3; 2000 train / 500 test points."""
    ds, gt = make_rbm_ground_truth(4, 3, 0.5, 2500, RngStream(1000 + seed))
    return ds.points[:2000], ds.points[2000:], gt


# 1 -----------------------------------------------------------------------
def test_criterion_01_gradient_suite():
    t0 = time.perf_counter()
    rng = RngStream(1)
    worst = 0.0
    for i in range(100):
        d, hid = 1 + i % 4, 1 + i % 3
        rbm = GaussianBernoulliRBM(d, hid)
        th = rng.normal(0, 0.7, size=rbm.n_params)
        x = rng.normal(size=d)
        worst = max(worst, rel_err(rbm.grad_x(th, x[None])[0], central_diff(lambda z: rbm.f(th, z[None])[0], x)))
        worst = max(worst, rel_err(rbm.grad_theta(th, x[None])[0], central_diff(lambda t: rbm.f(t, x[None])[0], th)))
        gm = DiagonalGaussian(d)
        th = rng.normal(0, 0.5, size=gm.n_params)
        worst = max(worst, rel_err(gm.grad_x(th, x[None])[0], central_diff(lambda z: gm.f(th, z[None])[0], x)))
        worst = max(worst, rel_err(gm.grad_theta(th, x[None])[0], central_diff(lambda t: gm.f(t, x[None])[0], th)))
        gen = MlpGenerator.initialized(3, [(4, 8, 16)[i % 3], 2], RngStream(i), 0.7)
        xi = gen.sample_noise(rng, 4)
        v = rng.normal(size=(4, 2))
        fd = central_diff(lambda p: float(np.sum(gen.with_params(p).forward(xi) * v)), gen.params)
        worst = max(worst, rel_err(gen.vjp(xi, v), fd))
    report(1, worst < 1e-5, f"max relative error {worst:.2e} (< 1e-05)", time.perf_counter() - t0, 10)


# 2 -----------------------------------------------------------------------
def grid_log_partition(model, theta, half_width=12.0, step=0.02):
    t = np.arange(-half_width, half_width + step / 2, step)
    if model.dim == 1:
        pts = t[:, None]
    else:
        X, Y = np.meshgrid(t, t, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
    f = model.f(theta, pts)
    mx = f.max()
    return mx + np.log(np.sum(np.exp(f - mx)) * step**model.dim)


def test_criterion_02_exact_partition():
    t0 = time.perf_counter()
    rng = RngStream(2)
    worst = 0.0
    for i in range(20):
        model = GaussianBernoulliRBM(1 + i % 2, 1 + (i // 2) % 4)
        theta = rng.normal(0, 0.5, size=model.n_params)
        worst = max(worst, abs(model.log_partition(theta) - grid_log_partition(model, theta)))
    report(2, worst < 1e-6, f"max |log Z - quadrature| {worst:.2e} (< 1e-06)", time.perf_counter() - t0, 60)


# 3 -----------------------------------------------------------------------
def test_criterion_03_svgd_correctness():
    t0 = time.perf_counter()
    model, theta = DiagonalGaussian(2), np.zeros(4)
    kernel = KernelSpec()
    x0 = RngStream(3).normal(2.0, 0.5, size=(100, 2))
    x = svgd_run(x0, model, theta, kernel, 0.05, 500)
    mean, var = x.mean(axis=0), x.var(axis=0)
    ratio = stein_discrepancy_diag(model, theta, x0, kernel) / stein_discrepancy_diag(model, theta, x, kernel)
    ok_mean = bool(np.all(np.abs(mean) < 0.05))
    ok_var = bool(np.all((var >= 0.85) & (var <= 1.15)))
    detail = (f"mean {np.round(mean, 3).tolist()} ({'ok' if ok_mean else 'out of tol'}), "
              f"var {np.round(var, 3).tolist()} ({'ok' if ok_var else 'out of band'}), "
              f"KSD ratio {ratio:.1f} ({'ok' if ratio >= 10 else '< 10'})")
    report(3, ok_mean and ok_var and ratio >= 10, detail, time.perf_counter() - t0, 30)


# 4 -----------------------------------------------------------------------
def test_criterion_04_finite_difference_order():
    t0 = time.perf_counter()
    model, theta = QuadraticModel(), np.array([1.0])
    x = RngStream(4).normal(0.0, 2.0, size=(50, 1))
    phi = phi_star(model, theta, x, KernelSpec())
    exact = np.mean(x[:, 0] * phi[:, 0])   # -mean[cross-derivative * phi], cross-derivative = -x
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    slopes = {}
    for variant in ("one_sided", "symmetric"):
        errs = np.array([abs(stein_score_matching_direction(model, theta, x, KernelSpec(), e, variant)[0] - exact)
                         for e in eps])
        with np.errstate(divide="ignore"):
            slopes[variant] = float(np.polyfit(np.log10(eps), np.log10(np.maximum(errs, 1e-300)), 1)[0])
    ok1 = abs(slopes["one_sided"] - 1.0) <= 0.15
    ok2 = abs(slopes["symmetric"] - 2.0) <= 0.2
    detail = f"one-sided slope {slopes['one_sided']:.3f} (1.0 +- 0.15), symmetric slope {slopes['symmetric']:.3f} (2.0 +- 0.2)"
    report(4, ok1 and ok2, detail, time.perf_counter() - t0, 5)


# 5 -----------------------------------------------------------------------
def test_criterion_05_steincd_beats_cd():
    t0 = time.perf_counter()
    model = GaussianBernoulliRBM(4, 3)
    wins, gaps = 0, []
    for seed in range(10):
        tr, te, _ = rbm_benchmark(seed)
        cfg = TrainConfig(seed=seed, iterations=2000, langevin_steps=1)
        st_s, _ = train(model, tr, cfg, "steincd", cadence=2000)
        st_c, _ = train(model, tr, cfg, "cd", cadence=2000)
        gap = heldout_ll(model, st_s.theta, te) - heldout_ll(model, st_c.theta, te)
        wins += gap >= 0
        gaps.append(gap)
    ok = wins >= 7 and np.mean(gaps) >= 0
    report(5, ok, f"SteinCD >= CD-1 in {wins}/10 seeds, mean gap {np.mean(gaps):+.4f} nats", time.perf_counter() - t0, 300)


# 6 -----------------------------------------------------------------------
def test_criterion_06_regularized_likelihood():
    t0 = time.perf_counter()
    model = DiagonalGaussian(2)
    theta = np.array([0.5, -0.3, 0.2, -0.4])
    m = 10_000
    pos = RngStream(6).normal(0.0, 1.0, size=(m, 2))
    neg = model.sample(theta, m, RngStream(60))
    worst = 0.0
    for gamma in (0.0, 0.5, 0.7, 1.0):
        target = model.mean_grad_theta(theta, pos) - (1 - gamma) * model.grad_log_partition(theta)
        got = discounted_direction(model, theta, pos, neg, gamma)
        se = (1 - gamma) * model.grad_theta(theta, neg).std(axis=0) / np.sqrt(m)
        z = np.abs(got - target) / np.maximum(se, 1e-300)
        worst = max(worst, float(np.max(np.where(se > 0, z, 0.0))))
        if gamma == 1.0:
            worst = max(worst, 0.0 if np.allclose(got, target, rtol=0, atol=1e-12) else np.inf)
    report(6, worst <= 5, f"max deviation {worst:.2f} standard errors (<= 5)", time.perf_counter() - t0, 10)


# 7 -----------------------------------------------------------------------
RING_STD = 1.0


def ring_run(seed, family):
    centers = ring_centers(8, 4.0)
    model = GaussianMixtureEnergy(centers, RING_STD)
    data = make_gaussian_mixture(centers, RING_STD, 1000, RngStream(seed)).points
    gen = MlpGenerator.initialized(4, [64, 64, 2], RngStream(seed).spawn(5))
    st, _ = train(model, data, TrainConfig(seed=seed, iterations=2000), "steingan", kernel=KernelSpec(family),
                  gen=gen, cadence=2000)
    xs = st.gen.forward(st.gen.sample_noise(RngStream(seed).spawn(7), 1000))
    return mode_coverage(xs, centers, 3 * RING_STD), avg_pairwise_distance(xs)


def test_criterion_07_repulsive_force_ablation():
    t0 = time.perf_counter()
    held, rows = 0, []
    for seed in range(5):
        cov_rbf, dist_rbf = ring_run(seed, "rbf")
        cov_const, dist_const = ring_run(seed, "constant")
        ok = cov_rbf >= 6 / 8 and dist_rbf >= 3 * dist_const and cov_const <= 2 / 8
        held += ok
        rows.append(f"{int(round(cov_rbf * 8))}/8 vs {int(round(cov_const * 8))}/8")
    report(7, held >= 4, f"holds in {held}/5 seeds (rbf vs constant coverage: {', '.join(rows)})",
           time.perf_counter() - t0, 180)


# 8 -----------------------------------------------------------------------
def test_criterion_08_mixing_endpoints():
    t0 = time.perf_counter()
    tr, _, _ = rbm_benchmark(0)
    model = GaussianBernoulliRBM(4, 3)
    gen = MlpGenerator.initialized(4, [32, 32, 4], RngStream(8).spawn(5))
    identical = []
    for alpha, pure in ((1.0, "steincd"), (0.0, "steingan")):
        cfg = TrainConfig(seed=8, iterations=100, mix_alpha=alpha)
        traj = {}
        for method in ("mix", pure):
            seen = []
            train(model, tr, cfg, method, gen=gen,
                  callback=lambda s, _i, acc=seen: acc.append(s.theta.copy()))
            traj[method] = np.array(seen)
        identical.append(traj["mix"].shape == (100, model.n_params)
                         and np.array_equal(traj["mix"].view(np.uint64), traj[pure].view(np.uint64)))
    report(8, all(identical), f"alpha=1 == SteinCD: {identical[0]}, alpha=0 == SteinGAN: {identical[1]} (100 iterations, bitwise)",
           time.perf_counter() - t0, 30)


# 9 -----------------------------------------------------------------------
def test_criterion_09_mixing_benefit():
    t0 = time.perf_counter()
    model = GaussianBernoulliRBM(4, 3)
    lls = {0.25: [], 0.0: []}
    for seed in range(10):
        tr, te, _ = rbm_benchmark(seed)
        for alpha in lls:
            gen = MlpGenerator.initialized(4, [32, 32, 4], RngStream(seed).spawn(5))
            st, _ = train(model, tr, TrainConfig(seed=seed, iterations=2000, mix_alpha=alpha), "mix", gen=gen,
                          cadence=2000)
            lls[alpha].append(heldout_ll(model, st.theta, te))
    a, b = float(np.mean(lls[0.25])), float(np.mean(lls[0.0]))
    report(9, a > b, f"mean test LL SteinCD-GAN(0.25) {a:.4f} vs SteinGAN {b:.4f}", time.perf_counter() - t0, 300)


# 10 ----------------------------------------------------------------------
def test_criterion_10_reproducibility(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"iterations": 300, "cadence": 50,
                               "dataset": {"kind": "rbm", "d": 4, "hidden": 3, "n_train": 2000, "n_test": 500}}))
    same = []
    for cmd in ("train-steincd", "train-cd", "train-ssm", "train-steingan", "train-mix"):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd}-{rep}"
            assert cli_main([cmd, "--config", str(cfg), "--seed", "7", "--out", str(out), "--no-plots"]) == 0
            rows = [r.rsplit(",", 1)[0] for r in (out / "metrics.csv").read_text().splitlines()]
            outs.append((rows, (out / "checkpoint.json").read_bytes()))
        same.append(outs[0] == outs[1])
    report(10, all(same), f"identical metrics (sans wall_ms) and checkpoints for {sum(same)}/5 train commands",
           time.perf_counter() - t0, 60)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
