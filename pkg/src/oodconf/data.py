"""Synthetic dataset generators and CSV input/output.

Generators are pure functions of their arguments and seed. The XOR
generator applies label-flip noise after clean labeling and keeps the
clean labels in the dataset provenance, so tests can compare flipped
against clean points.

CSV formats (full round-trip float precision):
  labeled dataset: header ``x1,...,xd,label``
  feature matrix:  header ``x1,...,xd``
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .trainer import atomic_write_text


class DatasetFormatError(Exception):
    """CSV file violates the documented schema."""


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) integers in [0, num_classes)
    num_classes: int = 2
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a nonempty (n, d) matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels out of range [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned lattice: per-axis (min, max) bounds and resolution."""

    bounds: tuple  # ((lo, hi), ...) per axis
    resolution: tuple  # points per axis, each >= 2

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = self.resolution
        if isinstance(res, int):
            res = (res,) * len(bounds)
        res = tuple(int(r) for r in res)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)
        if len(res) != len(bounds):
            raise ValueError("resolution must match number of axes")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"bounds must satisfy min < max, got ({lo}, {hi})")
        for r in res:
            if r < 2:
                raise ValueError(f"resolution must be >= 2, got {r}")


def gen_xor(n: int, noise: float, seed: int) -> LabeledDataset:
    """Noisy 2D XOR: uniform points on [-1, 1]^2, quadrant-parity labels.

    Quadrants I and III are class 0, II and IV class 1 (sign(0) counts as
    positive). Each label is then flipped independently with probability
    `noise`. Clean labels and the flip mask are kept in provenance.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must be in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    features = rng.uniform(-1.0, 1.0, size=(n, 2))
    clean = ((features[:, 0] < 0.0) != (features[:, 1] < 0.0)).astype(np.intp)
    flipped = rng.random(n) < noise
    labels = np.where(flipped, 1 - clean, clean)
    return LabeledDataset(
        features=features,
        labels=labels,
        num_classes=2,
        provenance={
            "generator": "xor",
            "seed": seed,
            "noise": noise,
            "clean_labels": clean,
            "flipped": flipped,
        },
    )


def gen_grid(spec: GridSpec) -> np.ndarray:
    """Row-major lattice spanning the bounds inclusive."""
    axes = [
        np.linspace(lo, hi, r)
        for (lo, hi), r in zip(spec.bounds, spec.resolution)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def gen_noise_ood(n: int, kind: str, d: int, seed: int, bounds=None,
                  exclude=None) -> np.ndarray:
    """Noise OOD features: i.i.d. U[0,1] or N(0.5, 1) clipped to [0,1].

    `bounds` optionally remaps each coordinate affinely from [0, 1] to
    (lo, hi) pairs. `exclude` (same per-axis pair format) rejects points
    falling inside the given box, for shell-shaped OOD sets.
    """
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be >= 1, got n={n}, d={d}")
    if kind not in ("uniform", "gaussian"):
        raise ValueError(f"kind must be 'uniform' or 'gaussian', got {kind!r}")
    rng = np.random.default_rng(seed)

    def draw(count: int) -> np.ndarray:
        if kind == "uniform":
            x = rng.random((count, d))
        else:
            x = np.clip(rng.normal(0.5, 1.0, size=(count, d)), 0.0, 1.0)
        if bounds is not None:
            for j, (lo, hi) in enumerate(bounds):
                x[:, j] = lo + (hi - lo) * x[:, j]
        return x

    if exclude is None:
        return draw(n)
    lo = np.array([pair[0] for pair in exclude])
    hi = np.array([pair[1] for pair in exclude])
    rows = []
    total = 0
    while total < n:
        x = draw(max(n - total, 16))
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        kept = x[~inside]
        if kept.size == 0 and total == 0 and len(rows) > 64:
            raise ValueError("exclude box rejects the entire sampling region")
        rows.append(kept)
        total += kept.shape[0]
    return np.concatenate(rows)[:n]


def _format_float(x: float) -> str:
    return repr(float(x))


def save_csv(dataset: LabeledDataset, path) -> None:
    """Labeled dataset CSV; written atomically."""
    d = dataset.features.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(d)] + ["label"])
    for row, label in zip(dataset.features, dataset.labels):
        writer.writerow([_format_float(v) for v in row] + [int(label)])
    atomic_write_text(path, buf.getvalue())


def save_features_csv(features, path) -> None:
    """Feature-matrix CSV (no labels); written atomically."""
    features = np.asarray(features, dtype=np.float64)
    d = features.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(d)])
    for row in features:
        writer.writerow([_format_float(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def _read_rows(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file, missing header")
    return rows[0], rows[1:]


def _check_header(header, path) -> int:
    """Validate x1..xd prefix; returns d."""
    d = len(header)
    if header and header[-1].strip() == "label":
        d -= 1
    expected = [f"x{j + 1}" for j in range(d)]
    if d < 1 or [h.strip() for h in header[:d]] != expected:
        raise DatasetFormatError(
            f"{path}: missing or invalid header (expected x1,...,xd[,label])"
        )
    return d


def load_csv(path, num_classes: int | None = None) -> LabeledDataset:
    """Read a labeled dataset CSV.

    Distinct diagnostics for missing header, ragged rows, non-numeric
    cells, and out-of-range labels; lines are named 1-based including the
    header.
    """
    header, body = _read_rows(path)
    if not header or header[-1].strip() != "label":
        raise DatasetFormatError(f"{path}: missing 'label' header column")
    d = _check_header(header, path)
    if not body:
        raise DatasetFormatError(f"{path}: no data rows")

    features = np.empty((len(body), d))
    labels = np.empty(len(body), dtype=np.intp)
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != d + 1:
            raise DatasetFormatError(
                f"{path}: line {line}: expected {d + 1} cells, got {len(row)}"
            )
        try:
            features[i] = [float(v) for v in row[:d]]
        except ValueError:
            raise DatasetFormatError(
                f"{path}: line {line}: non-numeric feature cell"
            ) from None
        try:
            labels[i] = int(row[d])
        except ValueError:
            raise DatasetFormatError(
                f"{path}: line {line}: non-integer label {row[d]!r}"
            ) from None

    m = num_classes if num_classes is not None else int(labels.max()) + 1
    bad = np.nonzero((labels < 0) | (labels >= m))[0]
    if bad.size:
        line = int(bad[0]) + 2
        raise DatasetFormatError(
            f"{path}: line {line}: label {int(labels[bad[0]])} out of range "
            f"[0, {m})"
        )
    return LabeledDataset(
        features=features, labels=labels, num_classes=m,
        provenance={"generator": "csv", "path": str(path)},
    )


def load_features_csv(path) -> np.ndarray:
    """Read a feature matrix CSV; a trailing label column is dropped."""
    header, body = _read_rows(path)
    d = _check_header(header, path)
    if not body:
        raise DatasetFormatError(f"{path}: no data rows")
    features = np.empty((len(body), d))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise DatasetFormatError(
                f"{path}: line {line}: expected {len(header)} cells, got "
                f"{len(row)}"
            )
        try:
            features[i] = [float(v) for v in row[:d]]
        except ValueError:
            raise DatasetFormatError(
                f"{path}: line {line}: non-numeric feature cell"
            ) from None
    return features
