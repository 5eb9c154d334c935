import numpy as np
import pytest

from datasets import Dataset, generate_dataset
from nn_core import DENSE, RELU, SOFTMAX_OUTPUT, Layer, Network


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch):
    monkeypatch.setenv("CARDDECK_LOG_FILE", "")


@pytest.fixture(scope="session")
def toy_split():
    """(train, test) with 4 classes of 3x8x8 images"""
    return generate_dataset(0, 4, 80, (8, 8, 3), test_fraction=0.25)


@pytest.fixture
def toy_train(toy_split):
    return toy_split[0]


@pytest.fixture
def toy_test(toy_split):
    return toy_split[1]


@pytest.fixture
def tiny_training():
    return {
        "epochs": 2,
        "batch_size": 16,
        "lr": 0.05,
        "momentum": 0.9,
        "weight_decay": 0.0,
        "schedule": "constant",
        "step_points": [],
    }


def dense_net(*weights, biases=None, relu=False):
    """Stack of dense layers from (out, in) weight lists"""
    layers = []
    for k, w in enumerate(weights):
        w = np.asarray(w, dtype=np.float32)
        b = None if biases is None else np.asarray(biases[k], dtype=np.float32)
        layers.append(Layer(DENSE, weights=w, bias=b))
        if relu and k < len(weights) - 1:
            layers.append(Layer(RELU))
    layers.append(Layer(SOFTMAX_OUTPUT))
    first = np.asarray(weights[0])
    last = np.asarray(weights[-1])
    return Network(layers, (first.shape[1],), last.shape[0])


def constant_class_net(input_shape, num_classes, label=0):
    """Dense net with zero weights whose bias always picks ``label``"""
    width = int(np.prod(input_shape))
    bias = np.zeros(num_classes, dtype=np.float32)
    bias[label] = 1.0
    layers = [
        Layer(DENSE, weights=np.zeros((num_classes, width), dtype=np.float32), bias=bias),
        Layer(SOFTMAX_OUTPUT),
    ]
    return Network(layers, tuple(input_shape), num_classes)


def flat_dataset(points, labels, num_classes):
    return Dataset(np.asarray(points, dtype=np.float32), np.asarray(labels), num_classes)
