"""Experiment runner.

    steinebm train-steincd --config cfg.json --seed 7 --out runs/steincd
    steinebm eval --checkpoint runs/steincd/checkpoint.json --data runs/steincd/test.csv
    steinebm sweep --config cfg.json --param mix_alpha --values 0,0.25,0.5,0.75,1 --out runs/sweep

Exit codes: 0 success, 2 usage error, 3 invalid configuration or input data,
4 numerical divergence during training.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TRAIN_FIELDS, ConfigError, ExperimentConfig, load_config_file, resolve_config
from .data_io import (
    DataFormatError,
    Dataset,
    load_dataset_csv,
    load_idx,
    make_gaussian_mixture,
    make_rbm_ground_truth,
    save_dataset_csv,
)
from .energy import DiagonalGaussian, GaussianBernoulliRBM, GaussianMixtureEnergy, ring_centers
from .evaluation import CSV_HEADER, test_log_likelihood
from .generator import MlpGenerator
from .kernels import KernelSpec
from .learners import TrainConfig
from .numerics import RngStream
from .steingan import DivergenceError, train

log = logging.getLogger("steinebm")

TRAIN_COMMANDS = {
    "train-steincd": "steincd",
    "train-cd": "cd",
    "train-ssm": "ssm",
    "train-steingan": "steingan",
    "train-mix": "mix",
}
EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3, 4

# substream indices under the run seed, shared with steingan.train
_THETA_INIT_STREAM, _GEN_INIT_STREAM = 4, 5


@dataclass
class RunResult:
    out_dir: Path
    metrics: list
    theta: np.ndarray
    gen: MlpGenerator | None


def build_data(cfg: ExperimentConfig):
    """Returns ``(train, test_or_None, mode_centers_or_None, component_std_or_None)``."""
    ds = cfg.dataset
    kind = ds["kind"]
    try:
        if kind == "rbm":
            full, _ = make_rbm_ground_truth(int(ds["d"]), int(ds["hidden"]), float(ds["param_scale"]),
                                            int(ds["n_train"]) + int(ds["n_test"]), RngStream(int(ds["seed"])),
                                            burn_in=int(ds["burn_in"]), thin=int(ds["thin"]))
            train_ds, test_ds = full.split(int(ds["n_train"]))
            return train_ds, (test_ds if len(test_ds) else None), None, None
        if kind == "mixture":
            centers = ring_centers(int(ds["n_modes"]), float(ds["radius"]))
            full = make_gaussian_mixture(centers, float(ds["std"]), int(ds["n_train"]) + int(ds["n_test"]),
                                         RngStream(int(ds["seed"])))
            train_ds, test_ds = full.split(int(ds["n_train"]))
            return train_ds, (test_ds if len(test_ds) else None), centers, float(ds["std"])
        if kind == "csv":
            train_ds = load_dataset_csv(ds["train"])
            test_ds = load_dataset_csv(ds["test"]) if ds["test"] else None
            return train_ds, test_ds, None, None
        if kind == "idx":
            full = load_idx(ds["images"], ds["labels"])
            n_test = int(ds["n_test"])
            if n_test:
                train_ds, test_ds = full.split(len(full) - n_test)
                return train_ds, test_ds, None, None
            return full, None, None, None
    except (DataFormatError, OSError) as exc:
        raise ConfigError("dataset", str(exc)) from None
    raise ConfigError("dataset.kind", f"unknown kind {kind!r}")


def build_model(cfg: ExperimentConfig, dim: int):
    spec = cfg.model
    if spec["d"] is not None and int(spec["d"]) != dim:
        raise ConfigError("model.d", f"model dimension {spec['d']} conflicts with data dimension {dim}")
    kind = spec["kind"]
    if kind == "gbrbm":
        model = GaussianBernoulliRBM(dim, int(spec["hidden"]))
        theta0 = model.init_theta(RngStream(cfg.train.seed).spawn(_THETA_INIT_STREAM), float(spec["init_scale"]))
    elif kind == "diag_gaussian":
        model = DiagonalGaussian(dim)
        theta0 = model.init_theta()
    elif kind == "mixture":
        if dim != 2:
            raise ConfigError("model.kind", "the ring mixture energy is two-dimensional")
        model = GaussianMixtureEnergy(ring_centers(int(spec["n_modes"]), float(spec["radius"])), float(spec["std"]))
        theta0 = model.init_theta()
    else:
        raise ConfigError("model.kind", f"unknown kind {kind!r}")
    return model, theta0


def build_generator(cfg: ExperimentConfig, dim: int) -> MlpGenerator:
    g = cfg.generator
    sizes = [int(w) for w in g["hidden_sizes"]] + [dim]
    return MlpGenerator.initialized(int(g["noise_dim"]), sizes, RngStream(cfg.train.seed).spawn(_GEN_INIT_STREAM),
                                    float(g["weight_std"]))


def write_metrics_csv(path, metrics) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in metrics:
            fh.write(rec.to_csv_row() + "\n")


def run_training(cfg: ExperimentConfig, method: str, out_dir, command: str = "", plots: bool = True) -> RunResult:
    out = Path(out_dir)
    train_ds, test_ds, centers, comp_std = build_data(cfg)
    model, theta0 = build_model(cfg, train_ds.dim)
    gen = build_generator(cfg, model.dim) if method in ("steingan", "mix") else None
    kernel = KernelSpec(cfg.kernel["family"], None if cfg.kernel["bandwidth"] is None else float(cfg.kernel["bandwidth"]))
    radius = cfg.mode_radius if cfg.mode_radius is not None else (3.0 * comp_std if comp_std else None)
    if isinstance(model, GaussianMixtureEnergy) and centers is None:
        centers, radius = model.centers, radius or 3.0 * model.std

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps())
    if test_ds is not None:
        save_dataset_csv(out / "test.csv", Dataset(test_ds.points))
    log.info("%s: %d train points, d=%d, %d iterations", method, len(train_ds), model.dim, cfg.train.iterations)
    state, metrics = train(model, train_ds.points, cfg.train, method, kernel=kernel, theta0=theta0, gen=gen,
                           testset=None if test_ds is None else test_ds.points, cadence=cfg.cadence,
                           mode_centers=centers, mode_radius=radius)
    write_metrics_csv(out / "metrics.csv", metrics)
    save_checkpoint(out / "checkpoint.json", model, state.theta, state.gen,
                    {"command": command or method, "seed": cfg.train.seed, "iteration": state.iteration})
    if plots and metrics:
        from .plotting import plot_metrics, plot_samples

        plot_metrics(metrics, out / "metrics.png", title=command or method)
        if state.gen is not None and model.dim == 2:
            xs = state.gen.forward(state.gen.sample_noise(RngStream(cfg.train.seed).spawn(6), 1000))
            plot_samples(xs, out / "samples.png", centers)
    return RunResult(out, metrics, state.theta, state.gen)


def _train_overrides(args) -> dict:
    over = {name: getattr(args, name, None) for name in TRAIN_FIELDS}
    over["cadence"] = getattr(args, "cadence", None)
    return over


def _parse_value(param: str, text: str):
    if param == "cadence":
        return int(text)
    default = {f.name: f.default for f in fields(TrainConfig)}[param]
    if isinstance(default, int) and not isinstance(default, bool):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON config file (missing keys take defaults)")
    p.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    p.add_argument("--cadence", type=int, help="record metrics every N iterations")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, type=type(f.default), default=None, metavar=f.name.upper(),
                       help=f"override {f.name} (default {f.default})")
    p.add_argument("--minibatch-size", dest="minibatch", type=int, default=None, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinebm", description="SVGD-based energy-model training experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, method in TRAIN_COMMANDS.items():
        _add_train_flags(sub.add_parser(name, help=f"train with the {method} learner"))
    p = sub.add_parser("sample", help="draw samples from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--out", type=Path, required=True, help="CSV destination")
    p = sub.add_parser("eval", help="held-out log-likelihood of a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="CSV dataset")
    p = sub.add_parser("sweep", help="one training run per parameter value")
    _add_train_flags(p)
    p.add_argument("--param", required=True, help="training key to vary, e.g. mix_alpha")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--train-command", default="train-mix", choices=sorted(TRAIN_COMMANDS))
    return parser


def _cmd_train(args) -> int:
    raw = load_config_file(args.config) if args.config else {}
    cfg = resolve_config(raw, _train_overrides(args))
    out = args.out or Path(cfg.output_dir)
    cfg = replace(cfg, output_dir=str(out))
    result = run_training(cfg, TRAIN_COMMANDS[args.command], out, args.command, plots=not args.no_plots)
    last = result.metrics[-1] if result.metrics else None
    print(f"wrote {out}" + (f"  final test_ll={last.test_ll!r}" if last else ""))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    allowed = set(TRAIN_FIELDS) | {"cadence"}
    if args.param not in allowed:
        raise ConfigError(args.param, "not a sweepable training key")
    try:
        values = [_parse_value(args.param, v.strip()) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(args.param, f"bad value: {exc}") from None
    raw = load_config_file(args.config) if args.config else {}
    base_over = _train_overrides(args)
    root = args.out or Path(resolve_config(raw, base_over).output_dir)
    rows = []
    for value in values:
        cfg = resolve_config(raw, {**base_over, args.param: value})
        run_dir = root / f"{args.param}={value}"
        cfg = replace(cfg, output_dir=str(run_dir))
        res = run_training(cfg, TRAIN_COMMANDS[args.train_command], run_dir, args.train_command,
                           plots=not args.no_plots)
        last = res.metrics[-1] if res.metrics else None
        rows.append((value, last))
        print(f"{args.param}={value}: final test_ll={last.test_ll if last else float('nan')!r}")
    with open(root / "summary.csv", "w") as fh:
        fh.write(f"{args.param},final_test_ll,final_stein_disc,final_mode_coverage,final_avg_pair_dist\n")
        for value, last in rows:
            cells = [last.test_ll, last.stein_disc, last.mode_coverage, last.avg_pair_dist] if last else [np.nan] * 4
            fh.write(",".join([str(value)] + [repr(float(c)) for c in cells]) + "\n")
    if not args.no_plots and rows:
        from .plotting import plot_sweep

        plot_sweep(args.param, [v for v, _ in rows], [r.test_ll if r else np.nan for _, r in rows],
                   root / "sweep.png")
    return EXIT_OK


def _cmd_eval(args) -> int:
    try:
        model, theta, _, _ = load_checkpoint(args.checkpoint)
        data = load_dataset_csv(args.data)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("checkpoint/data", str(exc)) from None
    if data.dim != model.dim:
        raise ConfigError("data", f"data dimension {data.dim} does not match model dimension {model.dim}")
    try:
        value = test_log_likelihood(model, theta, data.points)
    except ValueError as exc:
        raise ConfigError("checkpoint.model", str(exc)) from None
    print(f"test_ll {value!r}")
    return EXIT_OK


def _cmd_sample(args) -> int:
    try:
        model, theta, gen, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("checkpoint", str(exc)) from None
    if args.n < 1:
        raise ConfigError("n", "must be >= 1")
    rng = RngStream(args.seed)
    if gen is not None:
        pts = gen.forward(gen.sample_noise(rng, args.n))
    elif isinstance(model, GaussianBernoulliRBM):
        pts = model.gibbs_sample(theta, args.n, args.burn_in, 1, rng)
    elif isinstance(model, DiagonalGaussian):
        pts = model.sample(theta, args.n, rng)
    elif isinstance(model, GaussianMixtureEnergy):
        pts = make_gaussian_mixture(model.centers, model.std, args.n, rng).points
    else:
        raise ConfigError("checkpoint.model", f"cannot sample from {model.kind!r}")
    save_dataset_csv(args.out, Dataset(pts))
    print(f"wrote {args.n} samples to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"sample": _cmd_sample, "eval": _cmd_eval, "sweep": _cmd_sweep}.get(args.command, _cmd_train)
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: non-finite parameters at iteration {exc.iteration}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
