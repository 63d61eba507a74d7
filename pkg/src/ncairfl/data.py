"""Dataset ingestion (IDX), synthetic datasets, and device partitioning."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import IdxFormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Flat feature matrix in [0,1] with either class labels or regression targets."""

    features: np.ndarray  # (N, dim) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64 in {0..9}; all-zero dummy for regression
    split: str = "train"
    targets: Optional[np.ndarray] = None  # (N,) float64, regression only

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class DevicePartition:
    device_id: int
    sample_indices: np.ndarray  # unique indices into a Dataset

    def __len__(self) -> int:
        return self.sample_indices.shape[0]


@dataclass
class Batch:
    features: np.ndarray  # (B, dim)
    labels: np.ndarray  # (B,)
    targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.features.shape[0]


def _read_exact(f, n: int, path: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise IdxFormatError(f"{path}: truncated file, wanted {n} bytes, got {len(buf)}")
    return buf


def load_idx(images_path: str, labels_path: str, split: str = "train") -> Dataset:
    """Parse big-endian IDX image/label files into a normalized Dataset.

    Pixels are divided by 255 and images flattened row-major. Raises
    IdxFormatError on wrong magic numbers, mismatched sample counts, or
    truncated payloads.
    """
    with open(images_path, "rb") as f:
        magic, n_img, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(f, n_img * rows * cols, images_path)
    with open(labels_path, "rb") as f:
        magic, n_lab = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        lab_raw = _read_exact(f, n_lab, labels_path)
    if n_img != n_lab:
        raise IdxFormatError(
            f"count mismatch: {images_path} has {n_img} images, {labels_path} has {n_lab} labels"
        )
    features = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    features = features.reshape(n_img, rows * cols)
    labels = np.frombuffer(lab_raw, dtype=np.uint8).astype(np.int64)
    return Dataset(features=features, labels=labels, split=split)


def partition(
    dataset: Dataset, n: int, mode: str, rng: np.random.Generator
) -> List[DevicePartition]:
    """Split a dataset across n devices.

    iid: random equal-size split without replacement (sizes differ by at
    most one when n does not divide N).

    noniid: the classic shard construction - shuffle, stable-sort by label,
    cut into 2n contiguous shards, deal two shards per device at random.
    On a class-balanced dataset whose size is a multiple of 2n this gives
    every device samples from at most two classes; on unbalanced data a
    shard can straddle a class boundary.
    """
    n_samples = len(dataset)
    if n < 1:
        raise ValueError(f"device count must be >= 1, got {n}")
    if n > n_samples:
        raise ValueError(
            f"infeasible partition: {n} devices but only {n_samples} samples"
        )
    if mode == "iid":
        perm = rng.permutation(n_samples)
        chunks = np.array_split(perm, n)
    elif mode == "noniid":
        if 2 * n > n_samples:
            raise ValueError(
                f"infeasible partition: noniid needs >= {2*n} samples for {n} devices"
            )
        shuffled = rng.permutation(n_samples)
        by_label = shuffled[np.argsort(dataset.labels[shuffled], kind="stable")]
        shards = np.array_split(by_label, 2 * n)
        deal = rng.permutation(2 * n)
        chunks = [
            np.concatenate([shards[deal[2 * i]], shards[deal[2 * i + 1]]])
            for i in range(n)
        ]
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return [
        DevicePartition(device_id=i, sample_indices=np.sort(chunk))
        for i, chunk in enumerate(chunks)
    ]


def synth_dataset(
    kind: str,
    dims: int,
    size: int,
    rng: np.random.Generator,
    separation: float = 3.0,
    noise: float = 0.1,
    split: str = "train",
    n_classes: int = 10,
) -> Dataset:
    """Deterministic synthetic data for oracle and trend tests.

    blobs: Gaussian class-conditional clusters with per-coordinate
    class-mean offsets of ``separation`` noise standard deviations,
    affinely rescaled into [0,1] by one global map (which preserves the
    per-coordinate signal-to-noise ratio). separation=0 collapses every
    class onto one cluster. Labels cycle through the classes, so sizes
    divisible by ``n_classes`` give an exactly balanced set.

    quadratic-regression: uniform [0,1] features with noisy linear targets,
    a smooth least-squares objective with computable constants.
    """
    if size < 2:
        raise ValueError(f"synthetic dataset size must be >= 2, got {size}")
    if kind == "blobs":
        sigma = 0.1  # per-coordinate noise, pixel-like scale
        offsets = separation * sigma * rng.standard_normal((n_classes, dims))
        labels = np.arange(size, dtype=np.int64) % n_classes
        features = 0.5 + offsets[labels] + sigma * rng.standard_normal((size, dims))
        lo, hi = features.min(), features.max()
        features = (features - lo) / (hi - lo)
        return Dataset(features=features, labels=labels, split=split)
    if kind == "quadratic-regression":
        features = rng.random((size, dims))
        theta_star = rng.standard_normal(dims)
        targets = features @ theta_star + noise * rng.standard_normal(size)
        labels = np.zeros(size, dtype=np.int64)
        return Dataset(features=features, labels=labels, split=split, targets=targets)
    raise ValueError(f"unknown synthetic dataset kind {kind!r}")


def sample_batch(
    dataset: Dataset,
    part: DevicePartition,
    batch_size: int,
    rng: np.random.Generator,
) -> Batch:
    """Uniform without-replacement mini-batch from one device's indices.

    A batch larger than the partition falls back to sampling with
    replacement and warns, signalling a misconfigured run rather than
    aborting it.
    """
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    pool = part.sample_indices
    replace = batch_size > pool.shape[0]
    if replace:
        warnings.warn(
            f"device {part.device_id}: batch size {batch_size} exceeds partition "
            f"size {pool.shape[0]}; sampling with replacement",
            RuntimeWarning,
            stacklevel=2,
        )
    idx = rng.choice(pool, size=batch_size, replace=replace)
    targets = dataset.targets[idx] if dataset.targets is not None else None
    return Batch(
        features=dataset.features[idx],
        labels=dataset.labels[idx],
        targets=targets,
    )
