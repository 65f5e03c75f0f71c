"""Synthetic datasets, IDX ingestion and CSV persistence."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import MAX_ENUMERATED_HIDDEN, GaussianBernoulliRBM, GBRBMParams
from .numerics import RngStream

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Malformed dataset file. ``code`` is one of truncated, wrong_magic, dim_mismatch, malformed_row."""

    def __init__(self, code: str, message: str, line: int | None = None):
        super().__init__(message)
        self.code = code
        self.line = line


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("dataset points must be an (n, d) array")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.points.shape[0],):
                raise ValueError("labels must have one entry per point")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        lab = self.labels
        return (Dataset(self.points[:n_first], None if lab is None else lab[:n_first], dict(self.source)),
                Dataset(self.points[n_first:], None if lab is None else lab[n_first:], dict(self.source)))


def make_gaussian_mixture(centers, component_std: float, n: int, rng: RngStream) -> Dataset:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if n < 1 or not component_std > 0:
        raise ValueError("need n >= 1 and component_std > 0")
    comp = rng.integers(0, centers.shape[0], size=n)
    pts = centers[comp] + component_std * rng.normal(size=(n, centers.shape[1]))
    return Dataset(pts, comp, {"kind": "mixture", "centers": centers.tolist(), "std": component_std})


def make_rbm_ground_truth(d: int, hidden: int, param_scale: float, n: int, rng: RngStream,
                          burn_in: int = 100, thin: int = 1):
    """Random GB-RBM (all entries ~ Normal(0, param_scale)) and ``n`` Gibbs samples from it."""
    if hidden > MAX_ENUMERATED_HIDDEN:
        raise ValueError(f"hidden={hidden} exceeds {MAX_ENUMERATED_HIDDEN}")
    params = GBRBMParams(
        rng.normal(0.0, param_scale, size=(d, hidden)),
        rng.normal(0.0, param_scale, size=d),
        rng.normal(0.0, param_scale, size=hidden),
    )
    model = GaussianBernoulliRBM(d, hidden)
    pts = model.gibbs_sample(params.to_vector(), n, burn_in, thin, rng)
    source = {"kind": "rbm", "d": d, "hidden": hidden, "param_scale": param_scale,
              "theta": params.to_vector().tolist()}
    return Dataset(pts, None, source), params


def _read_idx(path) -> tuple[int, tuple[int, ...], np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise DataFormatError("truncated", f"{path}: truncated header")
    magic = struct.unpack(">I", raw[:4])[0]
    ndim = magic & 0xFF
    if magic >> 8 != 0x08 or ndim < 1:
        raise DataFormatError("wrong_magic", f"{path}: wrong magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError("truncated", f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise DataFormatError("truncated", f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    return magic, dims, np.frombuffer(raw, dtype=np.uint8, count=count, offset=header)


def load_idx(path, labels_path=None) -> Dataset:
    """Load an IDX image file (unsigned bytes) as points in [0, 1], flattened row-major."""
    magic, dims, payload = _read_idx(path)
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError("wrong_magic", f"{path}: wrong magic 0x{magic:08x}, expected image file 0x{IDX_IMAGES_MAGIC:08x}")
    n = dims[0]
    points = payload.reshape(n, -1).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        lmagic, ldims, lpayload = _read_idx(labels_path)
        if lmagic != IDX_LABELS_MAGIC:
            raise DataFormatError("wrong_magic", f"{labels_path}: wrong magic 0x{lmagic:08x}, expected label file")
        if ldims[0] != n:
            raise DataFormatError("dim_mismatch", f"{labels_path}: {ldims[0]} labels for {n} images")
        labels = lpayload.astype(np.int64)
    return Dataset(points, labels, {"kind": "idx", "path": str(path), "rows": dims[1:]})


def save_dataset_csv(path, dataset: Dataset) -> None:
    d = dataset.dim
    header = [f"x{i}" for i in range(d)] + (["label"] if dataset.labels is not None else [])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(dataset.points):
            cells = [format(float(v), ".17g") for v in row]
            if dataset.labels is not None:
                cells.append(str(dataset.labels[i]))
            fh.write(",".join(cells) + "\n")


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("malformed_row", f"{path}: empty file (missing header)", line=1)
        has_label = bool(header) and header[-1] == "label"
        d = len(header) - int(has_label)
        if d < 1 or header[:d] != [f"x{i}" for i in range(d)]:
            raise DataFormatError("malformed_row", f"{path}: line 1: bad header {header}", line=1)
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError("malformed_row", f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}", line=line_no)
            try:
                rows.append([float(v) for v in row[:d]])
                if has_label:
                    labels.append(int(row[d]))
            except ValueError as exc:
                raise DataFormatError("malformed_row", f"{path}: line {line_no}: {exc}", line=line_no) from None
    pts = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return Dataset(pts, np.array(labels, dtype=np.int64) if has_label else None, {"kind": "csv", "path": str(path)})
