import math

import numpy as np
import pytest

from conftest import constant_class_net, dense_net, flat_dataset
from datasets import Dataset
from errors import DatasetError, DimensionError, ScheduleError, TrainingDivergedError
from nn_core import (
    RELU,
    Layer,
    LrSchedule,
    Network,
    Optimizer,
    build_conv2,
    build_mlp,
    cross_entropy,
    evaluate,
    forward,
    loss_and_grads,
    lr_at,
    make_optimizer,
    make_schedule,
    predict_proba,
    train,
)


def test_relu_layer_forward():
    net = Network([Layer(RELU)], (3,), 3)
    np.testing.assert_array_equal(forward(net, [[-1.0, 0.0, 2.0]]), [[0.0, 0.0, 2.0]])


def test_identity_dense_layer():
    net = dense_net(np.eye(3), biases=[np.zeros(3)])
    x = np.array([[0.5, -1.5, 2.0], [3.0, 0.0, -0.25]], dtype=np.float32)
    np.testing.assert_array_equal(forward(net, x), x)


def test_two_layer_logits_match_naive_matmul():
    net = build_mlp((5,), 3, hidden=(4,), seed=0)
    x = np.random.default_rng(0).normal(size=(6, 5)).astype(np.float32)
    w1, b1 = net.layers[0].weights.astype(float), net.layers[0].bias.astype(float)
    w2, b2 = net.layers[2].weights.astype(float), net.layers[2].bias.astype(float)

    expected = np.zeros((6, 3))
    for n in range(6):
        hidden = [max(0.0, sum(w1[h, i] * x[n, i] for i in range(5)) + b1[h]) for h in range(4)]
        for c in range(3):
            expected[n, c] = sum(w2[c, h] * hidden[h] for h in range(4)) + b2[c]

    np.testing.assert_allclose(forward(net, x), expected, rtol=1e-6, atol=1e-6)


def test_forward_rejects_wrong_shape():
    net = build_mlp((5,), 3, hidden=(4,), seed=0)
    with pytest.raises(DimensionError) as info:
        forward(net, np.zeros((2, 6), dtype=np.float32))
    assert info.value.expected == ("N", 5)


def test_forward_is_pure(toy_test):
    net = build_conv2(toy_test.image_shape, 4, seed=3)
    first = forward(net, toy_test.images)
    np.testing.assert_array_equal(first, forward(net, toy_test.images))


def test_masked_weights_are_zero_in_forward():
    net = dense_net([[1.0, 2.0]])
    net.layers[0].mask = np.array([[True, False]])
    np.testing.assert_array_equal(forward(net, [[3.0, 5.0]]), [[3.0]])


def test_predict_proba_rows_sum_to_one(toy_test):
    probs = predict_proba(build_conv2(toy_test.image_shape, 4, seed=1), toy_test.images)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert (probs >= 0).all()


class TestLrSchedule:
    def test_step_schedule_late_epoch(self):
        sched = LrSchedule("step160", 0.1, 160, [(0.5, 0.01), (0.75, 0.001)])
        assert lr_at(sched, 0.9 * 160) == 0.001
        assert lr_at(sched, 80) == 0.01
        assert lr_at(sched, 79.99) == 0.1

    def test_cosine(self):
        sched = LrSchedule("cosine", 0.1, 10)
        assert lr_at(sched, 0) == 0.1
        assert lr_at(sched, 5) == pytest.approx(0.05, abs=1e-15)

    @pytest.mark.parametrize("epoch", [-0.1, 10, 11])
    def test_out_of_range(self, epoch):
        with pytest.raises(ScheduleError):
            lr_at(LrSchedule("constant", 0.1, 10), epoch)

    def test_make_schedule_from_config(self, tiny_training):
        sched = make_schedule(tiny_training)
        assert sched.kind == "constant"
        assert sched.total_epochs == 2


class TestOptimizer:
    def test_plain_sgd_step(self):
        w = np.array([1.0, 2.0], dtype=np.float32)
        g = np.array([0.5, -0.25])
        Optimizer(momentum=0.0).step({"w": w}, {"w": g}, lr=0.1)
        expected = (np.array([1.0, 2.0]) - 0.1 * g).astype(np.float32)
        np.testing.assert_array_equal(w, expected)

    def test_momentum_accumulates(self):
        w = np.zeros(1, dtype=np.float32)
        opt = Optimizer(momentum=0.5)
        opt.step({"w": w}, {"w": np.ones(1)}, lr=1.0)
        opt.step({"w": w}, {"w": np.ones(1)}, lr=1.0)
        # velocities 1 then 1.5
        assert w[0] == pytest.approx(-2.5)

    def test_frozen_positions_keep_exact_values(self):
        w = np.array([0.123456789, -7.0, 3.5], dtype=np.float32)
        before = w.copy()
        keep = np.array([True, False, True])
        Optimizer(momentum=0.9, weight_decay=0.01).step(
            {"w": w}, {"w": np.ones(3)}, lr=0.5, frozen={"w": keep}
        )
        assert w[1] == before[1]
        assert w[0] != before[0]

    def test_state_dict_round_trip(self):
        opt = Optimizer()
        opt.step({"w": np.zeros(2, dtype=np.float32)}, {"w": np.ones(2)}, lr=0.1)
        state = opt.state_dict()
        opt.reset()
        assert opt.velocity == {}
        opt.load_state_dict(state)
        np.testing.assert_array_equal(opt.velocity["w"], np.ones(2))

    def test_rejects_bad_momentum(self):
        with pytest.raises(ValueError):
            Optimizer(momentum=1.0)


class TestTrain:
    def test_zero_epochs_returns_identical_copy(self, toy_train, tiny_training):
        net = build_conv2(toy_train.image_shape, 4, seed=0)
        out = train(net, toy_train, make_optimizer(tiny_training), make_schedule(tiny_training), 0, 0)
        assert out is not net
        for a, b in zip(net.prunable_layers(), out.prunable_layers()):
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_does_not_modify_input(self, toy_train, tiny_training):
        net = build_conv2(toy_train.image_shape, 4, seed=0)
        before = net.copy()
        train(net, toy_train, make_optimizer(tiny_training), make_schedule(tiny_training), 1, 0)
        for a, b in zip(net.prunable_layers(), before.prunable_layers()):
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_deterministic(self, toy_train, tiny_training):
        def run():
            net = build_conv2(toy_train.image_shape, 4, seed=5)
            return train(net, toy_train, make_optimizer(tiny_training),
                         make_schedule(tiny_training), 2, 11, batch_size=16)

        a, b = run(), run()
        for la, lb in zip(a.prunable_layers(), b.prunable_layers()):
            np.testing.assert_array_equal(la.weights, lb.weights)
            np.testing.assert_array_equal(la.bias, lb.bias)

    def test_masked_weights_never_move(self, toy_train, tiny_training):
        net = build_conv2(toy_train.image_shape, 4, seed=2)
        rng = np.random.default_rng(0)
        net.set_masks([rng.random(layer.weights.shape) < 0.5 for layer in net.prunable_layers()])
        out = train(net, toy_train, make_optimizer(tiny_training), make_schedule(tiny_training),
                    2, 0, batch_size=16)
        for before, after in zip(net.prunable_layers(), out.prunable_layers()):
            frozen = ~before.mask
            np.testing.assert_array_equal(after.weights[frozen], before.weights[frozen])
            np.testing.assert_array_equal(after.mask, before.mask)

    def test_linearly_separable_toy_set(self):
        rng = np.random.default_rng(4)
        points = rng.uniform(-1, 1, size=(400, 2))
        margin = points[:, 0] + points[:, 1]
        points = points[np.abs(margin) > 0.3][:120]
        labels = (points[:, 0] + points[:, 1] > 0).astype(int)
        data = flat_dataset(points, labels, 2)

        training = {"epochs": 50, "lr": 0.1, "momentum": 0.9, "weight_decay": 0.0,
                    "schedule": "constant"}
        net = build_mlp((2,), 2, hidden=(), seed=0)
        out = train(net, data, make_optimizer(training), make_schedule(training), 50, 0,
                    batch_size=16)
        assert evaluate(out, data) == 1.0

    def test_nan_loss_aborts_with_location(self, tiny_training):
        images = np.full((8, 3), np.nan, dtype=np.float32)
        data = Dataset(images, np.zeros(8, dtype=int), 2)
        net = build_mlp((3,), 2, hidden=(4,), seed=0)
        with pytest.raises(TrainingDivergedError) as info:
            train(net, data, make_optimizer(tiny_training), make_schedule(tiny_training), 1, 0)
        assert info.value.epoch == 0
        assert info.value.iteration == 0

    def test_epochs_beyond_schedule(self, toy_train, tiny_training):
        net = build_mlp(toy_train.image_shape, 4, hidden=(8,), seed=0)
        with pytest.raises(ScheduleError):
            train(net, toy_train, make_optimizer(tiny_training), make_schedule(tiny_training), 3, 0)

    def test_records_lr_trace(self, toy_train, tiny_training):
        trace = []
        net = build_mlp(toy_train.image_shape, 4, hidden=(8,), seed=0)
        train(net, toy_train, make_optimizer(tiny_training), make_schedule(tiny_training), 2, 0,
              batch_size=16, lr_trace=trace)
        ipe = math.ceil(len(toy_train) / 16)
        assert [it for it, _ in trace] == list(range(2 * ipe))
        assert {lr for _, lr in trace} == {0.05}


class TestEvaluate:
    def test_constant_prediction(self):
        net = constant_class_net((4,), 3, label=0)
        x = np.random.default_rng(0).normal(size=(10, 4))
        assert evaluate(net, flat_dataset(x, np.zeros(10, dtype=int), 3)) == 1.0
        assert evaluate(net, flat_dataset(x, np.full(10, 2), 3)) == 0.0

    def test_ties_go_to_lowest_index(self):
        net = dense_net(np.zeros((3, 2)), biases=[np.zeros(3)])
        x = np.ones((5, 2))
        assert evaluate(net, flat_dataset(x, np.zeros(5, dtype=int), 3)) == 1.0

    def test_random_net_is_near_chance(self):
        rng = np.random.default_rng(0)
        images = rng.uniform(0, 1, size=(1000, 3, 8, 8)).astype(np.float32)
        labels = rng.permutation(np.repeat(np.arange(10), 100))
        net = build_conv2((3, 8, 8), 10, seed=0)
        assert 0.07 <= evaluate(net, Dataset(images, labels, 10)) <= 0.13

    def test_empty_dataset(self):
        net = constant_class_net((4,), 3)
        with pytest.raises(DatasetError):
            evaluate(net, flat_dataset(np.zeros((0, 4)), np.zeros(0, dtype=int), 3))

    def test_labels_out_of_range(self):
        net = constant_class_net((4,), 3)
        with pytest.raises(DatasetError):
            evaluate(net, flat_dataset(np.zeros((2, 4)), [0, 3], 3))

    def test_worker_count_does_not_matter(self, toy_test):
        net = build_conv2(toy_test.image_shape, 4, seed=9)
        single = evaluate(net, toy_test, batch_size=3, workers=1)
        assert evaluate(net, toy_test, batch_size=3, workers=4) == single


def test_cross_entropy_gradient_sums_to_zero():
    logits = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
    loss, grad = cross_entropy(logits, np.array([1, 2]))
    assert loss > 0
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-15)


def test_gradients_match_finite_differences():
    net = build_mlp((4,), 3, hidden=(5, 4), seed=1).astype(np.float64)
    for idx in net.prunable_indices()[:-1]:
        signs = np.where(np.arange(net.layers[idx].bias.size) % 2 == 0, 3.0, -3.0)
        net.layers[idx].bias[...] = signs
    rng = np.random.default_rng(2)
    x = 0.1 * rng.normal(size=(6, 4))
    y = rng.integers(0, 3, size=6)

    def loss_of(n):
        return cross_entropy(forward(n, x), y)[0]

    _, grads, _ = loss_and_grads(net, x, y)
    h = 1e-3
    for idx in net.prunable_indices():
        for part, analytic in (("weights", grads[idx][0]), ("bias", grads[idx][1])):
            param = getattr(net.layers[idx], part)
            numeric = np.zeros_like(param)
            for pos in np.ndindex(param.shape):
                original = param[pos]
                param[pos] = original + h
                up = loss_of(net)
                param[pos] = original - h
                down = loss_of(net)
                param[pos] = original
                numeric[pos] = (up - down) / (2 * h)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_conv_gradients_match_finite_differences():
    net = build_conv2((2, 5, 5), 3, channels=(3, 2), seed=4).astype(np.float64)
    for idx in net.prunable_indices()[:-1]:
        net.layers[idx].bias[...] = 1.0
    rng = np.random.default_rng(3)
    x = 0.1 * rng.normal(size=(2, 2, 5, 5))
    y = np.array([0, 2])
    _, grads, _ = loss_and_grads(net, x, y)

    idx = net.prunable_indices()[0]
    param = net.layers[idx].weights
    h = 1e-3
    for pos in [(0, 0, 0, 0), (1, 1, 2, 1), (2, 0, 1, 1)]:
        original = param[pos]
        param[pos] = original + h
        up = cross_entropy(forward(net, x), y)[0]
        param[pos] = original - h
        down = cross_entropy(forward(net, x), y)[0]
        param[pos] = original
        assert grads[idx][0][pos] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)
