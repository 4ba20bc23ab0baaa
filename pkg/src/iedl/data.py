"""Datasets: IDX file parsing, synthetic benchmarks, noise, and splits.

The IDX binary layout is big-endian: a 4-byte magic (0x00000803 for uint8
image tensors, 0x00000801 for uint8 label vectors), one 4-byte unsigned
dimension per tensor axis, then the raw payload.  Gzipped files are
detected by their two-byte signature and decompressed transparently.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "one_hot",
    "parse_idx_images",
    "parse_idx_labels",
    "encode_idx_images",
    "encode_idx_labels",
    "load_idx_dataset",
    "subsample",
    "make_blobs",
    "make_ood_ring",
    "add_noise",
    "split",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

OOD_LABEL = -1


@dataclass
class Dataset:
    """Feature matrix (N, d) float64 with integer labels (N,).

    Out-of-distribution sets carry the sentinel label ``OOD_LABEL`` and
    ``n_classes=0``; labeled sets have labels in [0, n_classes).
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"Dataset: features must be 2-D, got {self.features.ndim}-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"Dataset: {self.features.shape[0]} rows but {self.labels.shape[0]} labels"
            )
        if self.features.shape[0] == 0:
            raise ValueError("Dataset: empty")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("Dataset: non-finite feature values")
        if self.n_classes > 0:
            if np.any(self.labels < 0) or np.any(self.labels >= self.n_classes):
                raise ValueError(
                    f"Dataset: labels outside [0, {self.n_classes})"
                )
        elif not np.all(self.labels == OOD_LABEL):
            raise ValueError("Dataset: unlabeled sets must use the sentinel label")

    def __len__(self):
        return self.features.shape[0]

    def take(self, indices, name=None):
        return Dataset(
            self.features[indices],
            self.labels[indices],
            self.n_classes,
            self.name if name is None else name,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split fractions; the test share is whatever remains."""

    train_frac: float = 0.8
    val_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError(f"SplitSpec: train_frac must be in (0, 1), got {self.train_frac}")
        if not 0.0 < self.val_frac < 1.0:
            raise ValueError(f"SplitSpec: val_frac must be in (0, 1), got {self.val_frac}")
        if self.train_frac + self.val_frac > 1.0 + 1e-12:
            raise ValueError("SplitSpec: fractions exceed 1")


def one_hot(labels, n_classes):
    """Integer labels (N,) to one-hot rows (N, n_classes)."""
    lab = np.asarray(labels, dtype=np.int64)
    if np.any(lab < 0) or np.any(lab >= n_classes):
        raise ValueError(f"one_hot: labels outside [0, {n_classes})")
    return np.eye(n_classes, dtype=np.float64)[lab]


def _maybe_decompress(raw):
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _read_header(data, expected_magic, n_dims, what):
    if len(data) < 4:
        raise ValueError(f"{what}: truncated header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise ValueError(
            f"{what}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    header = 4 * (1 + n_dims)
    if len(data) < header:
        raise ValueError(f"{what}: truncated header")
    dims = struct.unpack(f">{n_dims}I", data[4:header])
    return dims, data[header:]


def parse_idx_images(data):
    """Decode an IDX uint8 image tensor to (N, rows, cols) floats in [0, 1]."""
    data = _maybe_decompress(bytes(data))
    (n, rows, cols), payload = _read_header(data, IMAGE_MAGIC, 3, "parse_idx_images")
    expected = n * rows * cols
    if len(payload) != expected:
        raise ValueError(
            f"parse_idx_images: payload has {len(payload)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols)
    return pixels.astype(np.float64) / 255.0


def parse_idx_labels(data, n_classes):
    """Decode an IDX uint8 label vector, checking the class range."""
    data = _maybe_decompress(bytes(data))
    (n,), payload = _read_header(data, LABEL_MAGIC, 1, "parse_idx_labels")
    if len(payload) != n:
        raise ValueError(
            f"parse_idx_labels: payload has {len(payload)} bytes, expected {n}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    if labels.size and labels.max() >= n_classes:
        raise ValueError(
            f"parse_idx_labels: label {labels.max()} outside [0, {n_classes})"
        )
    return labels


def encode_idx_images(pixels):
    """Encode a uint8 tensor (N, rows, cols) as IDX bytes."""
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError("encode_idx_images: expected (N, rows, cols)")
    header = struct.pack(">4I", IMAGE_MAGIC, *arr.shape)
    return header + arr.tobytes()


def encode_idx_labels(labels):
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("encode_idx_labels: expected a 1-D vector")
    header = struct.pack(">2I", LABEL_MAGIC, arr.shape[0])
    return header + arr.tobytes()


def load_idx_dataset(images_path, labels_path, n_classes, name=""):
    """Read an image/label IDX file pair into a flattened Dataset."""
    with open(images_path, "rb") as fh:
        images = parse_idx_images(fh.read())
    with open(labels_path, "rb") as fh:
        labels = parse_idx_labels(fh.read(), n_classes)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"load_idx_dataset: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    return Dataset(images.reshape(images.shape[0], -1), labels, n_classes, name)


def subsample(ds, n, seed):
    """Random subset of n rows without replacement."""
    if n > len(ds):
        raise ValueError(f"subsample: requested {n} of {len(ds)} rows")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(ds), size=n, replace=False)
    return ds.take(np.sort(idx))


def make_blobs(n_per_class, centers, sigma, seed, name="blobs"):
    """Isotropic Gaussian clusters, one class per center."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ValueError("make_blobs: need at least 2 centers of equal dimension")
    if n_per_class < 1 or sigma <= 0.0:
        raise ValueError("make_blobs: n_per_class >= 1 and sigma > 0 required")
    rng = np.random.default_rng(seed)
    k, dim = centers.shape
    features = rng.normal(
        loc=centers[:, np.newaxis, :], scale=sigma, size=(k, n_per_class, dim)
    ).reshape(k * n_per_class, dim)
    labels = np.repeat(np.arange(k), n_per_class)
    return Dataset(features, labels, k, name)


def make_ood_ring(n, radius, sigma, seed, center=(0.0, 0.0), name="ring"):
    """Points at uniform angles on a circle with radial Gaussian jitter.

    Labeled with the out-of-distribution sentinel.
    """
    if n < 1 or radius <= 0.0 or sigma < 0.0:
        raise ValueError("make_ood_ring: need n >= 1, radius > 0, sigma >= 0")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radii = radius + rng.normal(0.0, sigma, size=n)
    features = np.column_stack(
        (radii * np.cos(angles), radii * np.sin(angles))
    ) + np.asarray(center, dtype=np.float64)
    return Dataset(features, np.full(n, OOD_LABEL), 0, name)


def add_noise(ds, sigma, seed):
    """Additive iid Gaussian feature noise; values are not clipped."""
    if sigma < 0.0:
        raise ValueError("add_noise: sigma must be >= 0")
    rng = np.random.default_rng(seed)
    noisy = ds.features + rng.normal(0.0, sigma, size=ds.features.shape)
    return Dataset(noisy, ds.labels.copy(), ds.n_classes, f"{ds.name}+noise")


def split(ds, spec):
    """Stratified partition into train/val or train/val/test subsets.

    Per-class counts of each subset differ from exact proportionality by
    at most one.  Returns two datasets when the fractions sum to one,
    otherwise three.  Every row lands in exactly one subset.
    """
    if ds.n_classes < 1:
        raise ValueError("split: dataset has no class labels")
    rng = np.random.default_rng(spec.seed)
    two_way = spec.train_frac + spec.val_frac >= 1.0 - 1e-12
    buckets = ([], [], [])
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            raise ValueError(f"split: class {c} has no examples")
        rng.shuffle(idx)
        n_train = int(round(spec.train_frac * idx.size))
        if two_way:
            n_val = idx.size - n_train
        else:
            n_val = int(round(spec.val_frac * idx.size))
        buckets[0].append(idx[:n_train])
        buckets[1].append(idx[n_train : n_train + n_val])
        buckets[2].append(idx[n_train + n_val :])
    parts = []
    names = ("train", "val", "test")
    keep = 2 if two_way else 3
    for i in range(keep):
        sel = np.concatenate(buckets[i])
        if sel.size == 0:
            raise ValueError(f"split: {names[i]} subset is empty")
        rng.shuffle(sel)
        parts.append(ds.take(sel, name=f"{ds.name}/{names[i]}"))
    return tuple(parts)
