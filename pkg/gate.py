"""
Spectral-similarity gate.

Each augmentation gets a static index of P unit-norm spectral signatures
sampled from its training pool. A test batch is summarized by the mean of
its per-image normalized signatures (that mean is generally not unit norm);
its distance to the nearest stored point is d_ss, and the gate selects every
augmentation attaining the minimum.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import jsons
import numpy as np
from scipy.spatial import cKDTree

from errors import CheckpointError, GateError
from spectral import signatures
from version import FORMAT_VERSION

logger = logging.getLogger(__name__)

MAGIC = b"CDGI"
VERSION = FORMAT_VERSION


@dataclass
class SignatureIndex:
    augmentation_id: str
    points: np.ndarray  # (P, R) float64
    seed: Optional[int] = None
    source_hash: str = ""
    tree: cKDTree = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise GateError(f"index needs a non-empty (P, R) array, got {self.points.shape}")
        norms = np.linalg.norm(self.points, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise GateError("index points must have unit norm")
        self.tree = cKDTree(self.points)

    @property
    def P(self):
        return len(self.points)

    @property
    def R(self):
        return self.points.shape[1]

    def nearest(self, query):
        """(distance, point index) of the nearest stored signature"""
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.R,):
            raise GateError(f"query has shape {query.shape}, index stores {self.R}-vectors")
        dist, idx = self.tree.query(query, k=1)
        return float(dist), int(idx)


@dataclass
class GateDecision:
    selected: Tuple[str, ...]
    distances: Dict[str, float]
    batch_size: int

    def to_dict(self):
        return jsons.dump(self)


def file_hash(path):
    """sha256 of a file, used to tie an index to its source manifest"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_index(samples, augmentation_id, P, seed, source_hash="") -> SignatureIndex:
    """Sample P images without replacement and store their signatures"""
    samples = np.asarray(samples)
    if P < 1:
        raise GateError(f"P must be >= 1, got {P}")
    if P > len(samples):
        raise GateError(f"P={P} exceeds the {len(samples)} available samples")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(samples), size=P, replace=False)
    index = SignatureIndex(augmentation_id, signatures(samples[chosen]), seed, source_hash)
    logger.info(f"Built index '{augmentation_id}' with P={P}, R={index.R}")
    return index


def batch_signature(test_batch):
    """Mean of the per-image unit signatures"""
    if len(test_batch) == 0:
        raise GateError("Cannot compute a signature for an empty batch")
    return signatures(test_batch).mean(axis=0)


def d_ss(index: SignatureIndex, test_batch) -> float:
    dist, _ = index.nearest(batch_signature(test_batch))
    return dist


def select(indexes, test_batch) -> GateDecision:
    """Route a batch to every augmentation whose index is nearest"""
    if not indexes:
        raise GateError("No gate indexes to select from")
    query = batch_signature(test_batch)
    distances = {}
    for index in indexes:
        distances[index.augmentation_id] = index.nearest(query)[0]
    best = min(distances.values())
    selected = tuple(sorted(a for a, d in distances.items() if d == best))
    logger.debug(f"Gate selected {selected} from {distances}")
    return GateDecision(selected, distances, len(test_batch))


def save_index(index: SignatureIndex, path):
    """Binary points file plus a JSON sidecar at ``path + '.json'``"""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HII", VERSION, index.R, index.P))
        f.write(np.ascontiguousarray(index.points, dtype="<f8").tobytes())
    sidecar = {
        "augmentation_id": index.augmentation_id,
        "seed": index.seed,
        "source_hash": index.source_hash,
        "P": index.P,
        "R": index.R,
    }
    with open(f"{path}.json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_index(path) -> SignatureIndex:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a signature index (bad magic)")
    if len(data) < 14:
        raise CheckpointError(f"{path} is truncated")
    version, R, P = struct.unpack("<HII", data[4:14])
    if version != VERSION:
        raise CheckpointError(f"Unsupported index version {version}")
    payload = data[14:]
    if len(payload) != 8 * R * P:
        raise CheckpointError(f"{path} holds {len(payload)} payload bytes, expected {8 * R * P}")
    points = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(P, R)

    sidecar_path = f"{path}.json"
    meta = {}
    if os.path.exists(sidecar_path):
        with open(sidecar_path, "r") as f:
            meta = json.load(f)
    augmentation_id = meta.get("augmentation_id") or os.path.splitext(os.path.basename(path))[0]
    return SignatureIndex(augmentation_id, points, meta.get("seed"), meta.get("source_hash", ""))
