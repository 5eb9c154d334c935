"""
Training augmentations (clean, gaussian, mix) and the test-time corruption suite.

Both work on float32 images laid out (C, H, W) or batches (N, C, H, W) and
clip to the dataset value range. Image-space operations go through OpenCV
one channel plane at a time; geometric warps wrap around the borders, since
the synthetic images tile.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import cv2
import numpy as np

from datasets import Dataset

logger = logging.getLogger(__name__)

AUGMENTATION_KINDS = ("clean", "gaussian", "mix")
MIX_OPS = (
    "rotate",
    "shear_x",
    "shear_y",
    "translate_x",
    "translate_y",
    "posterize",
    "solarize",
    "autocontrast",
    "equalize",
)
# equalize turns the quantization steps of low-variance planes into broadband
# noise; it has to be named in ``ops`` explicitly
DEFAULT_MIX_OPS = tuple(op for op in MIX_OPS if op != "equalize")

# Severity 1..5 parameters for each corruption. Noise levels avoid the
# gaussian augmentation's sigma so test shifts never equal a training one.
SEVERITY_TABLES = {
    "gauss-noise": (0.04, 0.06, 0.08, 0.09, 0.12),
    "shot-noise": (500, 250, 100, 75, 50),
    "box-blur": (3, 3, 5, 5, 7),
    "contrast": (0.75, 0.5, 0.4, 0.3, 0.15),
    "pixelate": (1, 2, 2, 4, 4),
}
CORRUPTION_KINDS = tuple(SEVERITY_TABLES)


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str = "clean"
    sigma: float = 0.1  # fraction of the value range
    p: float = 0.5
    width: int = 3
    max_depth: int = 3
    ops: Tuple[str, ...] = DEFAULT_MIX_OPS
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in AUGMENTATION_KINDS:
            raise ValueError(f"Unknown augmentation {self.kind!r}, choose from {AUGMENTATION_KINDS}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        unknown = set(self.ops) - set(MIX_OPS)
        if unknown:
            raise ValueError(f"Unknown mix ops {sorted(unknown)}")
        if self.width < 1 or not 1 <= self.max_depth:
            raise ValueError("mix width and depth must be >= 1")

    @property
    def augmentation_id(self):
        return self.name or self.kind

    @classmethod
    def from_config(cls, entry):
        """Accept either a bare kind string or a mapping with overrides"""
        if isinstance(entry, str):
            return cls(kind=entry)
        entry = dict(entry)
        if "ops" in entry:
            entry["ops"] = tuple(entry["ops"])
        return cls(**entry)


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int = 1

    def __post_init__(self):
        if self.kind not in SEVERITY_TABLES:
            raise ValueError(f"Unknown corruption {self.kind!r}, choose from {CORRUPTION_KINDS}")
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be in 1..5, got {self.severity}")

    @property
    def parameter(self):
        return SEVERITY_TABLES[self.kind][self.severity - 1]

    @property
    def label(self):
        return f"{self.kind}-{self.severity}"


def _span(value_range):
    lo, hi = value_range
    return lo, hi, hi - lo


def _per_plane(image, fn):
    return np.stack([fn(np.ascontiguousarray(plane, dtype=np.float32)) for plane in image])


# ---------------------------------------------------------------------------
# mix operations, all on a single (C, H, W) image normalized to [0, 1]
# ---------------------------------------------------------------------------

def _warp(image, matrix):
    h, w = image.shape[1:]
    return _per_plane(
        image,
        lambda p: cv2.warpAffine(p, matrix, (w, h), flags=cv2.INTER_LINEAR,
                                 borderMode=cv2.BORDER_WRAP),
    )


def _rotate(image, rng):
    h, w = image.shape[1:]
    angle = rng.uniform(-30, 30)
    return _warp(image, cv2.getRotationMatrix2D(((w - 1) / 2, (h - 1) / 2), angle, 1.0))


def _shear(axis):
    def op(image, rng):
        h, w = image.shape[1:]
        s = rng.uniform(-0.3, 0.3)
        if axis == "x":
            matrix = np.float32([[1, s, -s * (h - 1) / 2], [0, 1, 0]])
        else:
            matrix = np.float32([[1, 0, 0], [s, 1, -s * (w - 1) / 2]])
        return _warp(image, matrix)
    return op


def _translate(axis):
    def op(image, rng):
        h, w = image.shape[1:]
        if axis == "x":
            matrix = np.float32([[1, 0, rng.uniform(-w / 4, w / 4)], [0, 1, 0]])
        else:
            matrix = np.float32([[1, 0, 0], [0, 1, rng.uniform(-h / 4, h / 4)]])
        return _warp(image, matrix)
    return op


def _posterize(image, rng):
    levels = 2 ** int(rng.integers(2, 5))
    return np.floor(image * levels).clip(0, levels - 1) / (levels - 1)


def _solarize(image, rng):
    threshold = rng.uniform(0.5, 1.0)
    return np.where(image < threshold, image, 1.0 - image)


def _autocontrast(image, rng):
    def stretch(plane):
        if float(plane.max() - plane.min()) < 1e-6:
            return plane
        return cv2.normalize(plane, None, 0.0, 1.0, cv2.NORM_MINMAX)
    return _per_plane(image, stretch)


def _equalize(image, rng):
    def eq(plane):
        return cv2.equalizeHist(np.round(plane * 255).astype(np.uint8)).astype(np.float32) / 255.0
    return _per_plane(image, eq)


_MIX_FUNCS = {
    "rotate": _rotate,
    "shear_x": _shear("x"),
    "shear_y": _shear("y"),
    "translate_x": _translate("x"),
    "translate_y": _translate("y"),
    "posterize": _posterize,
    "solarize": _solarize,
    "autocontrast": _autocontrast,
    "equalize": _equalize,
}


def _mix(image01, spec, rng):
    weights = rng.dirichlet(np.ones(spec.width))
    m = rng.beta(1.0, 1.0)
    mixed = np.zeros_like(image01, dtype=np.float64)
    for w in weights:
        chain = image01
        for _ in range(int(rng.integers(1, spec.max_depth + 1))):
            op = spec.ops[int(rng.integers(len(spec.ops)))]
            chain = _MIX_FUNCS[op](chain, rng)
        mixed += w * chain
    return (1 - m) * image01 + m * mixed


def _augment_one(image, spec, rng, value_range):
    lo, hi, span = _span(value_range)
    if spec.kind == "clean":
        return image
    if spec.kind == "gaussian":
        if rng.random() >= spec.p:
            return image
        noisy = image + rng.normal(0.0, spec.sigma * span, size=image.shape)
        return np.clip(noisy, lo, hi).astype(image.dtype)
    image01 = (image.astype(np.float32) - lo) / span
    out = _mix(image01, spec, rng)
    return np.clip(out * span + lo, lo, hi).astype(image.dtype)


def augment(image, spec: AugmentationSpec, seed, value_range=(0.0, 1.0)):
    """Augment one (C, H, W) image; identity for the clean spec"""
    return _augment_one(np.asarray(image), spec, np.random.default_rng(seed), value_range)


def augment_batch(images, spec: AugmentationSpec, rng, value_range=(0.0, 1.0)):
    if spec.kind == "clean":
        return images
    return np.stack([_augment_one(img, spec, rng, value_range) for img in images])


def make_augmenter(spec: AugmentationSpec, value_range=(0.0, 1.0)):
    """Training-loop hook ``(batch, rng) -> batch``, None for clean"""
    if spec.kind == "clean":
        return None

    def augmenter(batch, rng):
        return augment_batch(batch, spec, rng, value_range)

    return augmenter


def augment_dataset(data: Dataset, spec: AugmentationSpec, seed) -> Dataset:
    """One augmented copy of every image, drawn the way training draws them"""
    rng = np.random.default_rng(seed)
    return data.with_images(augment_batch(data.images, spec, rng, data.value_range))


def gate_pool(data: Dataset, spec: AugmentationSpec, seed) -> Dataset:
    """Images with the augmentation applied, the pool a gate index samples from.

    Gaussian noise is forced on for every image; training keeps its ``p``.
    """
    if spec.kind == "gaussian":
        spec = replace(spec, p=1.0)
    return augment_dataset(data, spec, seed)


# ---------------------------------------------------------------------------
# corruptions
# ---------------------------------------------------------------------------

def _box_blur(image, k):
    if k == 1:
        return image.copy()
    return _per_plane(image, lambda p: cv2.blur(p, (k, k)))


def _pixelate(image, block):
    if block == 1:
        return image.copy()
    h, w = image.shape[1:]
    small = (max(1, w // block), max(1, h // block))

    def down_up(plane):
        reduced = cv2.resize(plane, small, interpolation=cv2.INTER_AREA)
        return cv2.resize(reduced, (w, h), interpolation=cv2.INTER_NEAREST)

    return _per_plane(image, down_up)


def _corrupt_one(image, spec, rng, value_range):
    lo, hi, span = _span(value_range)
    param = spec.parameter
    x = image.astype(np.float32)
    if spec.kind == "gauss-noise":
        out = x + rng.normal(0.0, 1.0, size=x.shape) * (param * span)
    elif spec.kind == "shot-noise":
        x01 = np.clip((x - lo) / span, 0, 1)
        out = rng.poisson(x01 * param) / param * span + lo
    elif spec.kind == "box-blur":
        out = _box_blur(x, int(param))
    elif spec.kind == "contrast":
        means = x.mean(axis=(1, 2), keepdims=True)
        out = (x - means) * param + means
    else:
        out = _pixelate(x, int(param))
    return np.clip(out, lo, hi).astype(np.float32)


def corrupt(image, spec: CorruptionSpec, seed, value_range=(0.0, 1.0)):
    """Corrupt one (C, H, W) image, or a batch when given 4 dims"""
    image = np.asarray(image)
    rng = np.random.default_rng(seed)
    if image.ndim == 4:
        return np.stack([_corrupt_one(img, spec, rng, value_range) for img in image])
    return _corrupt_one(image, spec, rng, value_range)


def box_blur(image, k):
    """Box blur with a k x k kernel on a (C, H, W) image"""
    return _box_blur(np.asarray(image, dtype=np.float32), int(k))


def corrupt_dataset(data: Dataset, spec: CorruptionSpec, seed) -> Dataset:
    return data.with_images(corrupt(data.images, spec, seed, data.value_range))


def corruption_suite(kinds=CORRUPTION_KINDS, severities=(1, 2, 3, 4, 5)):
    return [CorruptionSpec(kind, s) for kind in kinds for s in severities]


def build_suite(data: Dataset, specs, seed):
    """(label, corrupted dataset) pairs, one seed stream per corruption"""
    return [
        (spec.label, corrupt_dataset(data, spec, [seed, i]))
        for i, spec in enumerate(specs)
    ]
