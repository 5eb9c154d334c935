import numpy as np
import pytest

from checkpoint import decode, encode, load_network, save_network
from errors import CheckpointError
from nn_core import BINARY1, build_conv2, build_mlp


@pytest.fixture
def decorated_net():
    """conv2 net carrying masks, scores and one binarized layer"""
    net = build_conv2((3, 8, 8), 4, seed=7)
    rng = np.random.default_rng(1)
    for layer in net.prunable_layers():
        layer.mask = rng.random(layer.weights.shape) < 0.7
        layer.scores = rng.random(layer.weights.shape).astype(np.float32)
    last = net.prunable_layers()[-1]
    last.precision = BINARY1
    last.alpha = 0.3125
    last.weights = np.where(last.weights >= 0, 0.3125, -0.3125).astype(np.float32)
    last.bias = None
    return net


def test_round_trip_preserves_everything(decorated_net):
    restored = decode(encode(decorated_net))
    assert restored.input_shape == decorated_net.input_shape
    assert restored.num_classes == decorated_net.num_classes
    assert restored.arch == "conv2"
    for a, b in zip(decorated_net.layers, restored.layers):
        assert (a.kind, a.padding, a.precision, a.alpha) == (b.kind, b.padding, b.precision, b.alpha)
        for name in ("weights", "bias", "mask", "scores"):
            x, y = getattr(a, name), getattr(b, name)
            if x is None:
                assert y is None
            else:
                np.testing.assert_array_equal(x, y)


def test_encoding_is_bit_exact(decorated_net):
    blob = encode(decorated_net)
    assert encode(decode(blob)) == blob


def test_binary_layer_stored_as_float32_signed_gain(decorated_net):
    restored = decode(encode(decorated_net)).prunable_layers()[-1]
    assert restored.precision == BINARY1
    assert restored.weights.dtype == np.float32
    np.testing.assert_array_equal(np.unique(restored.weights), np.float32([-0.3125, 0.3125]))


def test_save_and_load(tmp_path):
    net = build_mlp((5,), 3, hidden=(4,), seed=0)
    path = tmp_path / "net.ckpt"
    save_network(net, path)
    restored = load_network(path)
    assert restored.describe() == net.describe()
    assert path.read_bytes()[:4] == b"CDCK"


def test_bad_magic():
    with pytest.raises(CheckpointError, match="magic"):
        decode(b"NOPE" + encode(build_mlp((2,), 2, hidden=(), seed=0))[4:])


def test_truncated():
    blob = encode(build_mlp((5,), 3, hidden=(4,), seed=0))
    with pytest.raises(CheckpointError, match="Truncated"):
        decode(blob[:-3])


def test_trailing_bytes():
    blob = encode(build_mlp((5,), 3, hidden=(4,), seed=0))
    with pytest.raises(CheckpointError, match="trailing"):
        decode(blob + b"\x00")


def test_unsupported_version():
    blob = bytearray(encode(build_mlp((2,), 2, hidden=(), seed=0)))
    blob[4:6] = (99).to_bytes(2, "little")
    with pytest.raises(CheckpointError, match="version"):
        decode(bytes(blob))
