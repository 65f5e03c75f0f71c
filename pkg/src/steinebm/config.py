"""Experiment configuration: a strict JSON schema with documented defaults."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .learners import TrainConfig
from .numerics import RNG_ALGORITHM

DATASET_DEFAULTS = {
    "rbm": {"d": 4, "hidden": 3, "param_scale": 0.5, "n_train": 2000, "n_test": 500, "seed": 1000,
            "burn_in": 100, "thin": 1},
    "mixture": {"n_modes": 8, "radius": 4.0, "std": 1.0, "n_train": 2000, "n_test": 500, "seed": 1000},
    "csv": {"train": None, "test": None},
    "idx": {"images": None, "labels": None, "n_test": 0},
}
MODEL_DEFAULTS = {
    "gbrbm": {"d": None, "hidden": 3, "init_scale": 0.02},
    "diag_gaussian": {"d": None},
    "mixture": {"d": None, "n_modes": 8, "radius": 4.0, "std": 1.0},
}
KERNEL_DEFAULTS = {"family": "rbf", "bandwidth": None}
GENERATOR_DEFAULTS = {"noise_dim": 4, "hidden_sizes": [32, 32], "weight_std": 0.02}
TRAIN_FIELDS = [f.name for f in fields(TrainConfig)]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    model: dict = field(default_factory=lambda: {"kind": "gbrbm", **MODEL_DEFAULTS["gbrbm"]})
    kernel: dict = field(default_factory=lambda: dict(KERNEL_DEFAULTS))
    generator: dict = field(default_factory=lambda: dict(GENERATOR_DEFAULTS))
    dataset: dict = field(default_factory=lambda: {"kind": "rbm", **DATASET_DEFAULTS["rbm"]})
    cadence: int = 100
    mode_radius: float | None = None
    output_dir: str = "runs/experiment"

    def to_dict(self) -> dict:
        out = {name: getattr(self.train, name) for name in TRAIN_FIELDS}
        out.update(model=self.model, kernel=self.kernel, generator=self.generator, dataset=self.dataset,
                   cadence=self.cadence, mode_radius=self.mode_radius, output_dir=self.output_dir,
                   rng_algorithm=RNG_ALGORITHM)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _section(raw, name: str, defaults_by_kind: dict | None, flat_defaults: dict | None = None) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be an object")
    if defaults_by_kind is not None:
        kind = raw.get("kind", next(iter(defaults_by_kind)))
        if kind not in defaults_by_kind:
            raise ConfigError(f"{name}.kind", f"unknown kind {kind!r}; expected one of {sorted(defaults_by_kind)}")
        defaults = {"kind": kind, **defaults_by_kind[kind]}
    else:
        defaults = dict(flat_defaults)
    for key in raw:
        if key not in defaults:
            raise ConfigError(f"{name}.{key}", "unknown key")
    return {**defaults, **raw}


def _coerce_train(values: dict) -> TrainConfig:
    kwargs = {}
    for f in fields(TrainConfig):
        if f.name not in values:
            continue
        v = values[f.name]
        default = f.default
        try:
            if isinstance(default, bool):
                v = bool(v)
            elif isinstance(default, int):
                if isinstance(v, float) and not v.is_integer():
                    raise ValueError("expected an integer")
                v = int(v)
            elif isinstance(default, float):
                v = float(v)
            elif isinstance(default, str):
                v = str(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f.name, str(exc)) from None
        kwargs[f.name] = v
    probe = TrainConfig.__new__(TrainConfig)
    for f in fields(TrainConfig):
        object.__setattr__(probe, f.name, kwargs.get(f.name, f.default))
    problems = TrainConfig.validate(probe)
    if problems:
        raise ConfigError(*problems[0])
    return TrainConfig(**kwargs)


def resolve_config(raw: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge a parsed config document with flag overrides, fill defaults, validate.

    ``overrides`` maps flat training keys (``minibatch``, ``seed``, ...) or
    ``cadence``/``output_dir`` to values; ``None`` values are ignored.
    """
    raw = dict(raw or {})
    raw.pop("rng_algorithm", None)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    allowed = set(TRAIN_FIELDS) | {"model", "kernel", "generator", "dataset", "cadence", "mode_radius", "output_dir"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    train = _coerce_train({k: raw[k] for k in TRAIN_FIELDS if k in raw})
    dataset = _section(raw.get("dataset"), "dataset", DATASET_DEFAULTS)
    model = _section(raw.get("model"), "model", MODEL_DEFAULTS)
    kernel = _section(raw.get("kernel"), "kernel", None, KERNEL_DEFAULTS)
    generator = _section(raw.get("generator"), "generator", None, GENERATOR_DEFAULTS)

    if kernel["family"] not in ("rbf", "constant"):
        raise ConfigError("kernel.family", "must be 'rbf' or 'constant'")
    if kernel["bandwidth"] is not None and not float(kernel["bandwidth"]) > 0:
        raise ConfigError("kernel.bandwidth", "must be positive or null")
    if int(generator["noise_dim"]) < 1:
        raise ConfigError("generator.noise_dim", "must be >= 1")
    if any(int(w) < 1 for w in generator["hidden_sizes"]):
        raise ConfigError("generator.hidden_sizes", "widths must be >= 1")
    cadence = raw.get("cadence", 100)
    if not isinstance(cadence, int) or cadence < 1:
        raise ConfigError("cadence", "must be a positive integer")
    mode_radius = raw.get("mode_radius")
    if mode_radius is not None and not float(mode_radius) > 0:
        raise ConfigError("mode_radius", "must be positive or null")

    data_dim = _dataset_dim(dataset)
    if model["d"] is None:
        model["d"] = data_dim
    elif data_dim is not None and int(model["d"]) != data_dim:
        raise ConfigError("model.d", f"model dimension {model['d']} conflicts with dataset dimension {data_dim}")
    if model["kind"] == "gbrbm" and not 1 <= int(model["hidden"]) <= 25:
        raise ConfigError("model.hidden", "must lie in [1, 25] for exact evaluation")
    if dataset["kind"] in ("rbm", "mixture"):
        for key in ("n_train",):
            if int(dataset[key]) < 1:
                raise ConfigError(f"dataset.{key}", "must be >= 1")
        if int(dataset["n_test"]) < 0:
            raise ConfigError("dataset.n_test", "must be >= 0")
    if dataset["kind"] == "csv" and not dataset["train"]:
        raise ConfigError("dataset.train", "path required")
    if dataset["kind"] == "idx" and not dataset["images"]:
        raise ConfigError("dataset.images", "path required")
    return ExperimentConfig(train=train, model=model, kernel=kernel, generator=generator, dataset=dataset,
                            cadence=cadence, mode_radius=None if mode_radius is None else float(mode_radius),
                            output_dir=str(raw.get("output_dir", "runs/experiment")))


def _dataset_dim(dataset: dict) -> int | None:
    if dataset["kind"] == "rbm":
        return int(dataset["d"])
    if dataset["kind"] == "mixture":
        return 2
    return None


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror or exc}") from None
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<file>", "top level must be an object")
    return doc
