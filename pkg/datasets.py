"""
Synthetic image datasets and their on-disk manifests.

Images are float32 NCHW in [0, 1]. Each class is a smooth texture that tiles:
a class-specific grating with random phase, a random 1/|k|^2 field and a broad
bump at a class-specific anchor, all under a periodic Hann window over a flat
background. The bump makes classes separable by a linear classifier; there is no
additive pixel noise, so noise is something only augmentations and
corruptions add.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import yaml

from errors import DatasetError

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    value_range: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise DatasetError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        self.value_range = (float(self.value_range[0]), float(self.value_range[1]))

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.images[idx], self.labels[idx], self.num_classes, self.value_range)

    def with_images(self, images):
        return Dataset(images, self.labels, self.num_classes, self.value_range)


@dataclass
class DatasetManifest:
    path: str
    labels_path: str
    dims: Tuple[int, int, int]  # (d1, d2, channels)
    count: int
    num_classes: int
    value_range: Tuple[float, float] = (0.0, 1.0)
    seed: Optional[int] = None

    def to_dict(self):
        return {
            "path": self.path,
            "labels_path": self.labels_path,
            "dims": list(self.dims),
            "count": self.count,
            "num_classes": self.num_classes,
            "value_range": list(self.value_range),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                path=data["path"],
                labels_path=data["labels_path"],
                dims=tuple(int(d) for d in data["dims"]),
                count=int(data["count"]),
                num_classes=int(data["num_classes"]),
                value_range=tuple(data.get("value_range", (0.0, 1.0))),
                seed=data.get("seed"),
            )
        except (KeyError, TypeError) as e:
            raise DatasetError(f"Malformed dataset manifest: {e}")


# integer wave vectors (kx, ky) on the |k| ~ 2 ring; gratings built from them tile exactly
GRATING_VECTORS = ((2, 0), (2, 1), (1, 2), (0, 2), (-1, 2), (-2, 1))
BACKGROUND = 0.4
GRATING_AMPLITUDE = 0.08
TEXTURE_AMPLITUDE = 0.08
BUMP_AMPLITUDE = 0.35
BUMP_CONCENTRATION = 1.0


def _periodic_texture(rng, d1, d2):
    """Zero-mean, unit-std periodic field whose amplitude falls as 1/|k|^2"""
    ky = np.fft.fftfreq(d1) * d1
    kx = np.fft.fftfreq(d2) * d2
    k2 = ky[:, None] ** 2 + kx[None, :] ** 2
    amplitude = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    phases = np.exp(2j * math.pi * rng.uniform(size=k2.shape))
    field = np.real(np.fft.ifft2(amplitude * phases))
    return field / (field.std() + 1e-12)


def _class_image(rng, label, num_classes, d1, d2, channels):
    yy, xx = np.mgrid[0:d1, 0:d2].astype(np.float64)
    window = np.sin(math.pi * yy / d1) ** 2 * np.sin(math.pi * xx / d2) ** 2

    kx, ky = GRATING_VECTORS[(label * len(GRATING_VECTORS)) // num_classes]
    phase = rng.uniform(0, 2 * math.pi)
    grating = np.cos(2 * math.pi * (kx * xx / d2 + ky * yy / d1) + phase)

    angle = 2 * math.pi * label / num_classes
    jy, jx = rng.uniform(-1.0, 1.0, size=2)
    cy = d1 / 2 + (d1 / 5) * math.sin(angle) + jy
    cx = d2 / 2 + (d2 / 5) * math.cos(angle) + jx
    bump = np.exp(BUMP_CONCENTRATION * (
        np.cos(2 * math.pi * (xx - cx) / d2) + np.cos(2 * math.pi * (yy - cy) / d1) - 2.0
    ))

    plane = BACKGROUND + window * (
        GRATING_AMPLITUDE * grating
        + TEXTURE_AMPLITUDE * _periodic_texture(rng, d1, d2)
        + BUMP_AMPLITUDE * bump
    )
    image = np.empty((channels, d1, d2))
    for c in range(channels):
        image[c] = plane * (0.85 + 0.15 * math.cos(label + 2 * c))
    return np.clip(image, 0.0, 1.0)


def generate_dataset(seed, classes, count, dims, test_fraction=0.2):
    """Balanced synthetic set split per class into (train, test).

    ``dims`` is (d1, d2, channels); ``count`` covers both splits.
    """
    d1, d2, channels = (int(d) for d in dims)
    if classes < 2:
        raise DatasetError(f"Need at least 2 classes, got {classes}")
    if count % classes:
        raise DatasetError(f"count {count} is not divisible by classes {classes}")
    if min(d1, d2) < 4 or channels < 1:
        raise DatasetError(f"Images must be at least 4x4 with a channel, got {dims}")
    if not 0 <= test_fraction < 1:
        raise DatasetError(f"test_fraction must be in [0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    per_class = count // classes
    labels = np.repeat(np.arange(classes), per_class)
    images = np.stack(
        [_class_image(rng, int(y), classes, d1, d2, channels) for y in labels]
    ).astype(np.float32)

    test_per_class = int(round(test_fraction * per_class))
    train_idx, test_idx = [], []
    for c in range(classes):
        members = rng.permutation(np.flatnonzero(labels == c))
        test_idx.append(members[:test_per_class])
        train_idx.append(members[test_per_class:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))
    logger.info(
        f"Generated {count} images of {channels}x{d1}x{d2}, {classes} classes "
        f"({len(train_idx)} train / {len(test_idx)} test)"
    )
    return (
        Dataset(images[train_idx], labels[train_idx], classes),
        Dataset(images[test_idx], labels[test_idx], classes),
    )


def save_dataset(data: Dataset, out_dir, name, seed=None) -> DatasetManifest:
    """Write images/labels as flat little-endian binaries plus a YAML manifest"""
    os.makedirs(out_dir, exist_ok=True)
    n, channels, d1, d2 = data.images.shape
    images_file = f"{name}_images.bin"
    labels_file = f"{name}_labels.bin"
    with open(os.path.join(out_dir, images_file), "wb") as f:
        f.write(np.ascontiguousarray(data.images, dtype="<f4").tobytes())
    with open(os.path.join(out_dir, labels_file), "wb") as f:
        f.write(np.ascontiguousarray(data.labels, dtype="<i4").tobytes())
    manifest = DatasetManifest(
        path=images_file,
        labels_path=labels_file,
        dims=(d1, d2, channels),
        count=n,
        num_classes=data.num_classes,
        value_range=data.value_range,
        seed=seed,
    )
    with open(os.path.join(out_dir, f"{name}.yaml"), "w") as f:
        yaml.safe_dump(manifest.to_dict(), f, default_flow_style=False, sort_keys=False)
    return manifest


def load_manifest(manifest_path) -> DatasetManifest:
    with open(manifest_path, "r") as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise DatasetError(f"{manifest_path} is not a dataset manifest")
    return DatasetManifest.from_dict(data)


def load_dataset(manifest_path) -> Dataset:
    manifest = load_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    d1, d2, channels = manifest.dims
    images_path = os.path.join(base, manifest.path)
    labels_path = os.path.join(base, manifest.labels_path)
    expected = manifest.count * d1 * d2 * channels * 4
    actual = os.path.getsize(images_path)
    if actual != expected:
        raise DatasetError(f"{images_path} has {actual} bytes, manifest implies {expected}")
    images = np.fromfile(images_path, dtype="<f4").astype(np.float32)
    labels = np.fromfile(labels_path, dtype="<i4").astype(np.int64)
    if len(labels) != manifest.count:
        raise DatasetError(f"{labels_path} has {len(labels)} labels, expected {manifest.count}")
    if len(labels) and (labels.min() < 0 or labels.max() >= manifest.num_classes):
        raise DatasetError(f"labels outside [0, {manifest.num_classes})")
    return Dataset(
        images.reshape(manifest.count, channels, d1, d2),
        labels,
        manifest.num_classes,
        manifest.value_range,
    )


def manifest_from_arrays(images, labels, out_dir, name, num_classes=None,
                         value_range=(0.0, 1.0), channels_last=True):
    """Adapter for external arrays such as CIFAR-style (N, H, W, C) uint8 data"""
    images = np.asarray(images)
    if images.ndim != 4:
        raise DatasetError(f"Expected 4D image array, got shape {images.shape}")
    if channels_last:
        images = images.transpose(0, 3, 1, 2)
    if images.dtype == np.uint8:
        images = images.astype(np.float32) / 255.0
        value_range = (0.0, 1.0)
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    data = Dataset(images.astype(np.float32), labels, num_classes, value_range)
    return save_dataset(data, out_dir, name)
