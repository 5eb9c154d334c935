"""
Versioned binary container for networks.

Layout (little-endian):
    header  : magic b"CDCK", u16 version, u32 layer count,
              u16 input rank, u32 dims..., u32 num_classes, u16 arch length, arch utf-8
    per layer:
              u8 kind tag, u8 precision tag, u8 flags, u32 padding, f64 alpha,
              u8 weight rank, u32 dims...,
              float32 weights, float32 bias (flag), packed mask bits (flag),
              float32 scores (flag)
"""
import logging
import struct

import numpy as np

from errors import CheckpointError
from nn_core import LAYER_KINDS, PRECISION_BITS, Layer, Network
from version import FORMAT_VERSION

logger = logging.getLogger(__name__)

MAGIC = b"CDCK"
VERSION = FORMAT_VERSION

KIND_TAGS = {kind: i for i, kind in enumerate(LAYER_KINDS)}
PRECISION_TAGS = {name: i for i, name in enumerate(sorted(PRECISION_BITS))}

HAS_BIAS = 1
HAS_MASK = 2
HAS_SCORES = 4


def _pack_array(arr):
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def encode(net: Network) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HI", VERSION, len(net.layers))
    out += struct.pack("<H", len(net.input_shape))
    out += struct.pack(f"<{len(net.input_shape)}I", *net.input_shape)
    arch = net.arch.encode("utf-8")
    out += struct.pack("<IH", net.num_classes, len(arch)) + arch
    for layer in net.layers:
        flags = 0
        if layer.bias is not None:
            flags |= HAS_BIAS
        if layer.mask is not None:
            flags |= HAS_MASK
        if layer.scores is not None:
            flags |= HAS_SCORES
        out += struct.pack(
            "<BBBId",
            KIND_TAGS[layer.kind],
            PRECISION_TAGS[layer.precision],
            flags,
            layer.padding,
            layer.alpha,
        )
        shape = () if layer.weights is None else layer.weights.shape
        out += struct.pack("<B", len(shape))
        out += struct.pack(f"<{len(shape)}I", *shape)
        if layer.weights is None:
            continue
        out += _pack_array(layer.weights)
        if flags & HAS_BIAS:
            out += _pack_array(layer.bias)
        if flags & HAS_MASK:
            out += np.packbits(layer.mask.reshape(-1)).tobytes()
        if flags & HAS_SCORES:
            out += _pack_array(layer.scores)
    return bytes(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"Truncated checkpoint: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, shape):
        count = int(np.prod(shape)) if shape else 0
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32).reshape(shape)


def decode(data: bytes) -> Network:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CheckpointError("Not a checkpoint file (bad magic)")
    version, layer_count = reader.unpack("<HI")
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    (rank,) = reader.unpack("<H")
    input_shape = reader.unpack(f"<{rank}I")
    num_classes, arch_len = reader.unpack("<IH")
    arch = reader.take(arch_len).decode("utf-8")
    kinds = {v: k for k, v in KIND_TAGS.items()}
    precisions = {v: k for k, v in PRECISION_TAGS.items()}
    layers = []
    for _ in range(layer_count):
        kind_tag, precision_tag, flags, padding, alpha = reader.unpack("<BBBId")
        if kind_tag not in kinds or precision_tag not in precisions:
            raise CheckpointError(f"Unknown layer tag {kind_tag}/{precision_tag}")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        weights = bias = mask = scores = None
        if ndim:
            weights = reader.floats(shape)
            if flags & HAS_BIAS:
                bias = reader.floats((shape[0],))
            if flags & HAS_MASK:
                size = int(np.prod(shape))
                packed = np.frombuffer(reader.take((size + 7) // 8), dtype=np.uint8)
                mask = np.unpackbits(packed, count=size).astype(bool).reshape(shape)
            if flags & HAS_SCORES:
                scores = reader.floats(shape)
        layers.append(
            Layer(
                kinds[kind_tag],
                weights=weights,
                bias=bias,
                padding=padding,
                mask=mask,
                scores=scores,
                precision=precisions[precision_tag],
                alpha=alpha,
            )
        )
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} trailing bytes after last layer")
    return Network(layers, input_shape, num_classes, arch=arch)


def save_network(net: Network, path):
    with open(path, "wb") as f:
        f.write(encode(net))
    logger.debug(f"Saved {net.arch} checkpoint to {path}")


def load_network(path) -> Network:
    with open(path, "rb") as f:
        return decode(f.read())
