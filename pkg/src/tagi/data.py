"""Datasets: CSV and MNIST IDX loaders, normalisation, splits, synthetic data."""

from __future__ import annotations

import csv
import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

#: environment variable naming the directory that holds benchmark files
DATA_DIR_ENV = "TAGI_DATA_DIR"


class DataError(ValueError):
    """Malformed or missing input data."""


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None
    target_names: list[str] | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.y = np.asarray(self.y)
        if len(self.x) != len(self.y):
            raise DataError(f"{len(self.x)} covariate rows but {len(self.y)} targets")

    def __len__(self):
        return len(self.x)

    def subset(self, index) -> "Dataset":
        return Dataset(self.x[index], self.y[index], self.feature_names, self.target_names)


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, Path(__file__).resolve().parents[2] / "data"))


# --------------------------------------------------------------------------
# loaders


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, target_columns: Sequence[int | str] = (-1,), delimiter: str | None = None,
             drop_columns: Sequence[int | str] = ()) -> Dataset:
    """Read a rectangular numeric table.

    Targets are selected by position (negative allowed) or header name; every
    other column not listed in ``drop_columns`` becomes a feature, in file
    order.  A header row is detected
    when its first line is not entirely numeric.  ``delimiter=None`` sniffs
    comma, semicolon, tab or whitespace.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    if delimiter is None:
        first = lines[0]
        delimiter = next((d for d in (",", ";", "\t") if d in first), None)
    if delimiter is None:
        rows = [ln.split() for ln in lines]
    else:
        rows = [[c.strip() for c in r] for r in csv.reader(lines, delimiter=delimiter)]

    header = None
    if not all(_is_number(c) for c in rows[0]):
        header, rows = [c.strip('"') for c in rows[0]], rows[1:]
    ncol = len(header) if header else len(rows[0])

    values = np.empty((len(rows), ncol))
    for i, row in enumerate(rows):
        lineno = i + 1 + (header is not None)
        if len(row) != ncol:
            raise DataError(f"{path}:{lineno}: expected {ncol} columns, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {j + 1} is not numeric: {cell!r}") from None
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise DataError(f"{path}:{bad[0] + 1 + (header is not None)}: missing or non-finite value in column {bad[1] + 1}")

    def position(t, what):
        if isinstance(t, str):
            if header is None or t not in header:
                raise DataError(f"{path}: {what} column {t!r} not found")
            return header.index(t)
        if not -ncol <= t < ncol:
            raise DataError(f"{path}: {what} column {t} out of range for {ncol} columns")
        return t % ncol

    targets = [position(t, "target") for t in target_columns]
    dropped = {position(t, "dropped") for t in drop_columns}
    features = [j for j in range(ncol) if j not in targets and j not in dropped]
    names = header or [f"c{j}" for j in range(ncol)]
    return Dataset(
        values[:, features],
        values[:, targets],
        [names[j] for j in features],
        [names[j] for j in targets],
    )


def _open_maybe_gz(path: Path):
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    if not path.exists():
        raise FileNotFoundError(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx_images(path) -> np.ndarray:
    with _open_maybe_gz(Path(path)) as f:
        raw = f.read()
    if len(raw) < 16:
        raise DataError(f"{path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != 2051:
        raise DataError(f"{path}: bad magic number {magic}, expected 2051")
    if len(raw) - 16 != n * rows * cols:
        raise DataError(f"{path}: expected {n * rows * cols} pixel bytes, found {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with _open_maybe_gz(Path(path)) as f:
        raw = f.read()
    if len(raw) < 8:
        raise DataError(f"{path}: truncated header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != 2049:
        raise DataError(f"{path}: bad magic number {magic}, expected 2049")
    if len(raw) - 8 != n:
        raise DataError(f"{path}: expected {n} labels, found {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8)


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """MNIST-style IDX pair (optionally gzipped); pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise DataError(f"{len(images)} images but {len(labels)} labels")
    if labels.size and labels.max() > 9:
        raise DataError(f"{labels_path}: label {labels.max()} outside 0-9")
    x = images.reshape(len(images), -1).astype(float) / 255.0
    return Dataset(x, labels.astype(int))


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.tobytes())


# --------------------------------------------------------------------------
# normalisation


@dataclass
class NormStats:
    """Per-column affine map ``normalised = (raw - shift) / scale``."""

    shift: np.ndarray
    scale: np.ndarray
    mode: str = "standard"

    @classmethod
    def fit(cls, a, mode: str = "standard") -> "NormStats":
        a = np.asarray(a, dtype=float)
        if mode == "standard":
            shift, scale = a.mean(axis=0), a.std(axis=0)
        elif mode == "range":  # onto [-1, 1]
            lo, hi = a.min(axis=0), a.max(axis=0)
            shift, scale = (hi + lo) / 2.0, (hi - lo) / 2.0
        elif mode == "none":
            shift, scale = np.zeros(a.shape[1:]), np.ones(a.shape[1:])
        else:
            raise ValueError(f"unknown normalisation mode {mode!r}")
        scale = np.where(scale > 0, scale, 1.0)  # constant columns
        return cls(np.asarray(shift, dtype=float), np.asarray(scale, dtype=float), mode)

    def normalize(self, a) -> np.ndarray:
        return (np.asarray(a, dtype=float) - self.shift) / self.scale

    def denormalize(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float) * self.scale + self.shift

    def denormalize_var(self, var) -> np.ndarray:
        return np.asarray(var, dtype=float) * self.scale**2


@dataclass
class Normalizer:
    x: NormStats
    y: NormStats | None = None

    @classmethod
    def fit(cls, ds: Dataset, mode: str = "standard", normalize_y: bool = True) -> "Normalizer":
        return cls(NormStats.fit(ds.x, mode), NormStats.fit(ds.y, mode) if normalize_y else None)

    def apply(self, ds: Dataset) -> Dataset:
        y = self.y.normalize(ds.y) if self.y is not None else ds.y
        return Dataset(self.x.normalize(ds.x), y, ds.feature_names, ds.target_names)


# --------------------------------------------------------------------------
# splits and synthetic data


@dataclass
class Split:
    train: np.ndarray
    test: np.ndarray = field(repr=False)


def kfold(n: int, folds: int, seed: int = 0, test_size: int | None = None) -> list[Split]:
    """Index splits for ``folds`` train/test partitions.

    Without ``test_size`` this is ordinary shuffled k-fold cross-validation
    (test sets partition ``range(n)``).  With ``test_size`` each fold is an
    independent random split with that many test indices, as in repeated
    hold-out benchmark protocols.
    """
    if folds < 2 and test_size is None:
        raise ValueError("need at least two folds")
    if folds > n:
        raise ValueError(f"cannot make {folds} folds from {n} items")
    rng = np.random.default_rng(seed)
    splits = []
    if test_size is None:
        perm = rng.permutation(n)
        for part in np.array_split(perm, folds):
            test = np.sort(part)
            splits.append(Split(np.setdiff1d(perm, test), test))
    else:
        if not 0 < test_size < n:
            raise ValueError(f"test_size must be in (0, {n})")
        for _ in range(folds):
            perm = rng.permutation(n)
            splits.append(Split(np.sort(perm[test_size:]), np.sort(perm[:test_size])))
    return splits


def make_toy_cubic(n: int = 20, noise_std: float = 3.0, x_range=(-4.0, 4.0), rng_seed: int = 0) -> Dataset:
    """``y = x**3 + v`` with ``v ~ N(0, noise_std**2)`` and uniform ``x``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    x = rng.uniform(x_range[0], x_range[1], size=n)
    y = x**3 + noise_std * rng.standard_normal(n)
    return Dataset(x[:, None], y[:, None], ["x"], ["y"])
