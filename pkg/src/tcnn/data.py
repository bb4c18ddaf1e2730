"""Dataset ingestion: IDX image files, labeled CSV, synthetic generators.

Normalization is plain [0, 1] scaling for IDX pixels; CSV features are
taken as-is. All loaders reject non-finite features. Splits are seeded
permutations, class-agnostic, with the train size rounded down.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, ShapeError
from .tensor import Tensor

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    inputs: Tensor          # [N, C, spatial...]
    labels: np.ndarray      # int64 [N]
    num_classes: int
    name: str

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.inputs.shape[0]
        if self.labels.shape != (n,):
            raise ShapeError(f"{self.labels.shape[0]} labels for {n} inputs")
        if n < 1:
            raise ShapeError("dataset must contain at least one sample")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise FormatError(
                f"labels must lie in [0, {self.num_classes}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]")
        if not np.isfinite(self.inputs.data).all():
            raise FormatError("dataset contains non-finite features")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(Tensor(self.inputs.data[indices]), self.labels[indices],
                       self.num_classes, name or self.name)


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count: int, path) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(f"{path}: truncated file (wanted {count} bytes, got {len(data)})")
    return data


def load_idx(images_path, labels_path) -> Dataset:
    """Parse big-endian IDX image/label files (raw or gzip)."""
    with _open_maybe_gzip(images_path) as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"{images_path}: bad magic 0x{magic:08x}, "
                              f"expected 0x{IDX_IMAGES_MAGIC:08x}")
        raw = _read_exact(fh, n * rows * cols, images_path)
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)

    with _open_maybe_gzip(labels_path) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"{labels_path}: bad magic 0x{magic:08x}, "
                              f"expected 0x{IDX_LABELS_MAGIC:08x}")
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path), dtype=np.uint8)

    if n != n_labels:
        raise FormatError(f"image count {n} != label count {n_labels}")
    images = (pixels.astype(np.float32) / np.float32(255.0))[:, None, :, :]
    num_classes = int(labels.max()) + 1
    return Dataset(Tensor(images), labels.astype(np.int64), num_classes,
                   name=Path(images_path).name)


def load_csv_labeled(path) -> Dataset:
    """Rows of feature floats with an integer label in the last column.

    A single non-numeric first row is treated as a header. Ragged rows,
    non-numeric cells and empty files are format errors.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise FormatError(f"{path}: empty file")
        has_header = False
        try:
            [float(cell) for cell in first.strip().split(",")]
        except ValueError:
            has_header = True
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0,
                           dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if table.size == 0:
        raise FormatError(f"{path}: no data rows")
    if table.shape[1] < 2:
        raise FormatError(f"{path}: rows need at least one feature and a label")

    features = table[:, :-1]
    raw_labels = table[:, -1]
    if not np.isfinite(features).all():
        raise FormatError(f"{path}: non-finite feature values")
    labels = raw_labels.astype(np.int64)
    if not np.all(raw_labels == labels):
        raise FormatError(f"{path}: labels in the last column must be integers")
    if labels.min() < 0:
        raise FormatError(f"{path}: negative labels")
    inputs = features.astype(np.float32)[:, None, :]
    return Dataset(Tensor(inputs), labels, int(labels.max()) + 1, name=Path(path).name)


_SYNTHETIC_SPATIAL = {
    "blobs-1d": (187,),
    "blobs-2d": (28, 28),
    "blobs-3d": (12, 12, 12),
}


def synthetic(kind: str, n: int, classes: int, seed: int,
              separation: float = 3.0) -> Dataset:
    """Class-conditional Gaussian patterns; separation 0 is pure noise.

    Each class gets a smooth random prototype (low-resolution noise blown
    up to the full grid, scaled by ``separation``); samples are the
    prototype plus unit Gaussian noise. Deterministic in the seed.
    """
    if kind not in _SYNTHETIC_SPATIAL:
        raise DomainError(f"unknown synthetic kind {kind!r}; "
                          f"choose from {sorted(_SYNTHETIC_SPATIAL)}")
    if n < 1 or classes < 2:
        raise DomainError("need n >= 1 and classes >= 2")
    spatial = _SYNTHETIC_SPATIAL[kind]
    rng = np.random.Generator(np.random.PCG64(seed))

    coarse = tuple(max(1, s // 4) for s in spatial)
    prototypes = []
    for _ in range(classes):
        low = rng.normal(size=coarse)
        proto = low
        for ax, (c, s) in enumerate(zip(coarse, spatial)):
            reps = int(np.ceil(s / c))
            proto = np.repeat(proto, reps, axis=ax)
            proto = np.take(proto, np.arange(s), axis=ax)
        prototypes.append(proto * separation)

    labels = np.arange(n, dtype=np.int64) % classes
    labels = rng.permutation(labels)
    noise = rng.normal(size=(n,) + spatial)
    inputs = np.stack([prototypes[int(c)] for c in labels]) + noise
    return Dataset(Tensor(inputs[:, None].astype(np.float32)), labels, classes,
                   name=kind)


def split(dataset: Dataset, fractions: tuple[float, float], seed: int):
    """Seeded permutation split into (train, test); train size rounds down."""
    if len(fractions) != 2 or abs(fractions[0] + fractions[1] - 1.0) > 1e-9:
        raise DomainError(f"fractions must be two values summing to 1, got {fractions}")
    if not 0 < fractions[0] < 1:
        raise DomainError("train fraction must lie strictly between 0 and 1")
    n = len(dataset)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    n_train = int(n * fractions[0])
    if n_train == 0 or n_train == n:
        raise DomainError(f"split of {n} samples at {fractions[0]} leaves an empty side")
    return (dataset.subset(perm[:n_train], f"{dataset.name}-train"),
            dataset.subset(perm[n_train:], f"{dataset.name}-test"))
