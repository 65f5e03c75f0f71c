"""Checkpoint documents: JSON with the model spec, flat parameters and RNG id."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .energy import EnergyModel, model_from_spec
from .generator import MlpGenerator
from .numerics import RNG_ALGORITHM

FORMAT = "steinebm.checkpoint/1"


def checkpoint_dict(model: EnergyModel, theta, gen: MlpGenerator | None = None, metadata: dict | None = None) -> dict:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.n_params,):
        raise ValueError(f"theta has shape {theta.shape}, model expects ({model.n_params},)")
    return {
        "format": FORMAT,
        "model": model.spec(),
        "theta": [float(v) for v in theta],
        "generator": None if gen is None else {**gen.spec(), "params": [float(v) for v in gen.params]},
        "rng_algorithm": RNG_ALGORITHM,
        "metadata": {"package_version": __version__, **(metadata or {})},
    }


def save_checkpoint(path, model: EnergyModel, theta, gen: MlpGenerator | None = None, metadata: dict | None = None):
    doc = checkpoint_dict(model, theta, gen, metadata)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path):
    """Returns ``(model, theta, generator_or_None, document)``."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} document")
    model = model_from_spec(doc["model"])
    theta = np.array(doc["theta"], dtype=np.float64)
    if theta.shape != (model.n_params,):
        raise ValueError(f"{path}: theta length {theta.size} does not match model ({model.n_params})")
    gen = None
    if doc.get("generator"):
        g = doc["generator"]
        gen = MlpGenerator(g["noise_dim"], tuple(g["layer_sizes"]), np.array(g["params"], dtype=np.float64))
    return model, theta, gen, doc
