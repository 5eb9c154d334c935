"""
Minimal deterministic training engine.

Tensors are numpy arrays: parameters are stored as float32 and every
reduction (matmul, sums, loss) is accumulated in float64 before being cast
back to the storage dtype. Layout is NCHW for images. Gradients are written
by hand per layer kind; only the five layer kinds below are supported.
"""
from __future__ import annotations

import copy
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import DatasetError, DimensionError, ScheduleError, TrainingDivergedError

if TYPE_CHECKING:
    from datasets import Dataset

logger = logging.getLogger(__name__)

DENSE = "dense"
CONV2D = "conv2d"
RELU = "relu"
GLOBAL_AVG_POOL = "global-avg-pool"
SOFTMAX_OUTPUT = "softmax-output"
LAYER_KINDS = (DENSE, CONV2D, RELU, GLOBAL_AVG_POOL, SOFTMAX_OUTPUT)
PRUNABLE_KINDS = (DENSE, CONV2D)

FULL32 = "full32"
BINARY1 = "binary1"
PRECISION_BITS = {FULL32: 32, BINARY1: 1}

SCHEDULE_KINDS = ("constant", "cosine", "step160")

_ACC = np.float64


@dataclass
class Layer:
    """One layer; weights/bias are empty for activation layers.

    dense weights are (out, in); conv2d weights are (out, in, k, k) with
    stride 1 and symmetric zero padding.
    """

    kind: str
    weights: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    padding: int = 0
    mask: Optional[np.ndarray] = None
    scores: Optional[np.ndarray] = None
    precision: str = FULL32
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"Unknown layer kind {self.kind!r}")
        if self.precision not in PRECISION_BITS:
            raise ValueError(f"Unknown precision {self.precision!r}")
        if self.kind == DENSE:
            if self.weights is None or self.weights.ndim != 2:
                raise DimensionError("dense weights must be (out, in)")
        elif self.kind == CONV2D:
            if self.weights is None or self.weights.ndim != 4:
                raise DimensionError("conv2d weights must be (out, in, k, k)")
            if self.weights.shape[2] != self.weights.shape[3]:
                raise DimensionError(
                    "conv2d kernel must be square",
                    expected="k x k",
                    actual=self.weights.shape[2:],
                )
        elif self.weights is not None:
            raise ValueError(f"{self.kind} layers carry no weights")
        if self.bias is not None and self.weights is not None:
            if self.bias.shape != (self.weights.shape[0],):
                raise DimensionError(
                    "bias shape", expected=(self.weights.shape[0],), actual=self.bias.shape
                )
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.weights is None or self.mask.shape != self.weights.shape:
                raise DimensionError(
                    "mask shape",
                    expected=None if self.weights is None else self.weights.shape,
                    actual=self.mask.shape,
                )

    @property
    def prunable(self):
        return self.kind in PRUNABLE_KINDS

    @property
    def out_features(self):
        return None if self.weights is None else self.weights.shape[0]

    @property
    def in_features(self):
        return None if self.weights is None else self.weights.shape[1]

    @property
    def fan_in(self):
        if self.weights is None:
            return 0
        return int(np.prod(self.weights.shape[1:]))

    def effective_weights(self):
        """Weights as the forward pass sees them (mask applied)"""
        if self.mask is None:
            return self.weights
        return self.weights * self.mask.astype(self.weights.dtype)

    def nonzero_count(self):
        if self.weights is None:
            return 0
        if self.mask is not None:
            return int(np.count_nonzero(self.mask & (self.weights != 0)))
        return int(np.count_nonzero(self.weights))


@dataclass
class Network:
    """Ordered layers plus the input shape (without batch axis)"""

    layers: List[Layer]
    input_shape: Tuple[int, ...]
    num_classes: int
    arch: str = "custom"

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        """Copy with every parameter cast, e.g. a float64 shadow for grad checks"""
        other = self.copy()
        for layer in other.layers:
            if layer.weights is not None:
                layer.weights = layer.weights.astype(dtype)
            if layer.bias is not None:
                layer.bias = layer.bias.astype(dtype)
        return other

    @property
    def dtype(self):
        for layer in self.layers:
            if layer.weights is not None:
                return layer.weights.dtype
        return np.dtype(np.float32)

    def prunable_indices(self):
        return [i for i, layer in enumerate(self.layers) if layer.prunable]

    def prunable_layers(self):
        return [self.layers[i] for i in self.prunable_indices()]

    @property
    def masks(self):
        return [layer.mask for layer in self.prunable_layers()]

    @property
    def scores(self):
        return [layer.scores for layer in self.prunable_layers()]

    @property
    def precision(self):
        return [layer.precision for layer in self.prunable_layers()]

    def set_masks(self, masks):
        layers = self.prunable_layers()
        if len(masks) != len(layers):
            raise DimensionError("mask count", expected=len(layers), actual=len(masks))
        for layer, mask in zip(layers, masks):
            if mask is not None and mask.shape != layer.weights.shape:
                raise DimensionError(
                    "mask shape", expected=layer.weights.shape, actual=mask.shape
                )
            layer.mask = None if mask is None else np.asarray(mask, dtype=bool).copy()

    def total_weights(self):
        return sum(layer.weights.size for layer in self.prunable_layers())

    def nonzero_weights(self):
        return sum(layer.nonzero_count() for layer in self.prunable_layers())

    def surviving_weights(self):
        """Unmasked positions, regardless of stored value"""
        total = 0
        for layer in self.prunable_layers():
            total += layer.weights.size if layer.mask is None else int(layer.mask.sum())
        return total

    def sparsity(self):
        total = self.total_weights()
        if total == 0:
            return 0.0
        return 1.0 - self.surviving_weights() / total

    def describe(self):
        parts = []
        for layer in self.layers:
            if layer.weights is not None:
                parts.append(f"{layer.kind}{tuple(layer.weights.shape)}")
            else:
                parts.append(layer.kind)
        return " -> ".join(parts)


@dataclass
class LrSchedule:
    kind: str = "constant"
    base_lr: float = 0.1
    total_epochs: int = 1
    # (epoch fraction, lr) pairs for step160, applied in order
    step_points: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ScheduleError(f"Unknown schedule kind {self.kind!r}")
        if not self.base_lr > 0:
            raise ScheduleError(f"base_lr must be positive, got {self.base_lr}")
        if self.total_epochs < 1:
            raise ScheduleError(f"total_epochs must be >= 1, got {self.total_epochs}")
        points = [(float(f), float(v)) for f, v in self.step_points]
        if any(v <= 0 for _, v in points):
            raise ScheduleError("step160 learning rates must be positive")
        self.step_points = sorted(points)


def lr_at(sched: LrSchedule, epoch: float) -> float:
    """Learning rate at a (fractional) epoch in [0, total_epochs)"""
    if not 0 <= epoch < sched.total_epochs:
        raise ScheduleError(
            f"epoch {epoch} outside schedule range [0, {sched.total_epochs})"
        )
    if sched.kind == "constant":
        return sched.base_lr
    if sched.kind == "cosine":
        return sched.base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / sched.total_epochs))
    lr = sched.base_lr
    for fraction, value in sched.step_points:
        if epoch >= fraction * sched.total_epochs:
            lr = value
    return lr


@dataclass
class Optimizer:
    """SGD with momentum and L2 weight decay, torch-style velocity"""

    kind: str = "SGD"
    momentum: float = 0.9
    weight_decay: float = 0.0
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind != "SGD":
            raise ValueError(f"Only SGD is supported, got {self.kind!r}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def step(self, params, grads, lr, frozen=None):
        """Update ``params`` in place; positions where ``frozen[name]`` is
        False keep their exact previous value."""
        frozen = frozen or {}
        for name, param in params.items():
            grad = np.asarray(grads[name], dtype=_ACC)
            p64 = param.astype(_ACC)
            direction = grad + self.weight_decay * p64 if self.weight_decay else grad
            if self.momentum:
                previous = self.velocity.get(name)
                if previous is None:
                    velocity = direction.copy()
                else:
                    if previous.shape != param.shape:
                        raise DimensionError(
                            f"velocity for {name}", expected=param.shape, actual=previous.shape
                        )
                    velocity = self.momentum * previous + direction
                self.velocity[name] = velocity
            else:
                velocity = direction
            updated = (p64 - lr * velocity).astype(param.dtype)
            keep = frozen.get(name)
            if keep is not None:
                updated = np.where(keep, updated, param)
            param[...] = updated

    def state_dict(self):
        return {name: v.copy() for name, v in self.velocity.items()}

    def load_state_dict(self, state):
        self.velocity = {name: v.copy() for name, v in state.items()}

    def reset(self):
        self.velocity = {}


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _im2col(x, k, padding):
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (k, k), axis=(2, 3))
    ho, wo = windows.shape[2], windows.shape[3]
    if ho < 1 or wo < 1:
        raise DimensionError("conv2d input smaller than kernel", expected=k, actual=(h, w))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    return cols, ho, wo


def _check_input(net, batch):
    x = np.asarray(batch)
    if x.ndim != len(net.input_shape) + 1 or x.shape[1:] != net.input_shape:
        raise DimensionError(
            "batch shape does not match network input",
            expected=("N",) + net.input_shape,
            actual=x.shape,
        )
    return x.astype(net.dtype, copy=False)


def _forward(net, batch, effective=None, keep_cache=False):
    x = _check_input(net, batch)
    dtype = net.dtype
    cache = []
    for idx, layer in enumerate(net.layers):
        entry = {"x": x}
        if layer.kind == DENSE:
            w = effective[idx] if effective and idx in effective else layer.effective_weights()
            flat = x.reshape(len(x), -1)
            if flat.shape[1] != w.shape[1]:
                raise DimensionError(
                    f"dense layer {idx} input", expected=w.shape[1], actual=flat.shape[1]
                )
            out = flat.astype(_ACC) @ w.astype(_ACC).T
            if layer.bias is not None:
                out += layer.bias
            x = out.astype(dtype)
        elif layer.kind == CONV2D:
            w = effective[idx] if effective and idx in effective else layer.effective_weights()
            if x.ndim != 4 or x.shape[1] != w.shape[1]:
                raise DimensionError(
                    f"conv2d layer {idx} input channels",
                    expected=w.shape[1],
                    actual=x.shape[1] if x.ndim == 4 else x.shape,
                )
            n = len(x)
            cols, ho, wo = _im2col(x, w.shape[2], layer.padding)
            out = cols.astype(_ACC) @ w.reshape(w.shape[0], -1).astype(_ACC).T
            if layer.bias is not None:
                out += layer.bias
            x = out.reshape(n, ho, wo, w.shape[0]).transpose(0, 3, 1, 2).astype(dtype)
            entry["cols"] = cols
            entry["out_hw"] = (ho, wo)
        elif layer.kind == RELU:
            x = np.maximum(x, 0).astype(dtype, copy=False)
        elif layer.kind == GLOBAL_AVG_POOL:
            if x.ndim != 4:
                raise DimensionError("global-avg-pool expects NCHW", actual=x.shape)
            x = x.astype(_ACC).mean(axis=(2, 3)).astype(dtype)
        # softmax-output passes logits through; probabilities come from predict_proba
        if keep_cache:
            entry["w"] = (
                (effective[idx] if effective and idx in effective else layer.effective_weights())
                if layer.prunable
                else None
            )
            cache.append(entry)
    if x.ndim != 2 or x.shape[1] != net.num_classes:
        raise DimensionError("logits", expected=("N", net.num_classes), actual=x.shape)
    return x, cache


def forward(net: Network, batch) -> np.ndarray:
    """Logits of shape (batch_size, num_classes)"""
    logits, _ = _forward(net, batch)
    return logits


def softmax(logits):
    z = np.asarray(logits, dtype=_ACC)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(net: Network, batch) -> np.ndarray:
    return softmax(forward(net, batch))


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits"""
    z = np.asarray(logits, dtype=_ACC)
    n = len(z)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def _backward(net, cache, dlogits):
    grads = {}
    g = np.asarray(dlogits, dtype=_ACC)
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        entry = cache[idx]
        x = entry["x"]
        if layer.kind == DENSE:
            w = entry["w"].astype(_ACC)
            flat = x.reshape(len(x), -1).astype(_ACC)
            dw = g.T @ flat
            db = g.sum(axis=0) if layer.bias is not None else None
            grads[idx] = (dw, db)
            if idx > 0:
                g = (g @ w).reshape(x.shape)
        elif layer.kind == CONV2D:
            w = entry["w"].astype(_ACC)
            out_c, in_c, k, _ = w.shape
            ho, wo = entry["out_hw"]
            n, _, h, wd = x.shape
            gm = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, out_c)
            dw = (gm.T @ entry["cols"].astype(_ACC)).reshape(w.shape)
            db = gm.sum(axis=0) if layer.bias is not None else None
            grads[idx] = (dw, db)
            if idx > 0:
                p = layer.padding
                dcols = (gm @ w.reshape(out_c, -1)).reshape(n, ho, wo, in_c, k, k)
                dxp = np.zeros((n, in_c, h + 2 * p, wd + 2 * p), dtype=_ACC)
                for i in range(k):
                    for j in range(k):
                        dxp[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                g = dxp[:, :, p:p + h, p:p + wd]
        elif layer.kind == RELU:
            g = g * (x > 0)
        elif layer.kind == GLOBAL_AVG_POOL:
            h, wd = x.shape[2], x.shape[3]
            g = np.broadcast_to(g[:, :, None, None] / (h * wd), x.shape).astype(_ACC)
    return grads


def loss_and_grads(net: Network, batch, labels, effective=None):
    """Loss, per-layer (d loss / d effective weight, d loss / d bias), logits.

    ``effective`` optionally overrides the weights a layer uses in the
    forward pass (e.g. score-selected or binarized weights).
    """
    logits, cache = _forward(net, batch, effective=effective, keep_cache=True)
    loss, dlogits = cross_entropy(logits, labels)
    return loss, _backward(net, cache, dlogits), logits


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def iterations_per_epoch(num_samples, batch_size):
    return max(1, math.ceil(num_samples / batch_size))


def epoch_order(num_samples, seed, epoch):
    """Shuffle for one epoch; depends only on (seed, epoch)"""
    return np.random.default_rng([seed, epoch]).permutation(num_samples)


def run_iterations(
    net: Network,
    data: "Dataset",
    sched: LrSchedule,
    epochs: int,
    seed: int,
    update: Callable,
    *,
    batch_size: int = 32,
    start_iteration: int = 0,
    hook: Optional[Callable] = None,
    augmenter: Optional[Callable] = None,
    lr_trace: Optional[list] = None,
):
    """Drive ``update(x, y, lr, iteration) -> (loss, correct)`` over
    deterministic mini-batches and return the number of iterations run.

    ``hook(iteration, net)`` runs before the update of each iteration, so it
    sees the weights at the start of that iteration.
    """
    if len(data) == 0:
        raise DatasetError("Cannot train on an empty dataset")
    if epochs > sched.total_epochs:
        raise ScheduleError(
            f"{epochs} epochs requested but schedule covers {sched.total_epochs}"
        )
    ipe = iterations_per_epoch(len(data), batch_size)
    total = epochs * ipe
    if not 0 <= start_iteration <= total:
        raise ScheduleError(f"start iteration {start_iteration} outside [0, {total}]")
    ran = 0
    for epoch in range(start_iteration // ipe, epochs):
        order = epoch_order(len(data), seed, epoch)
        loss_sum, correct, seen = 0.0, 0, 0
        for b in range(ipe):
            iteration = epoch * ipe + b
            if iteration < start_iteration:
                continue
            idx = order[b * batch_size:(b + 1) * batch_size]
            if hook is not None:
                hook(iteration, net)
            x = data.images[idx]
            y = data.labels[idx]
            if augmenter is not None:
                x = augmenter(x, np.random.default_rng([seed, epoch, b, 17]))
            lr = lr_at(sched, iteration / ipe)
            if lr_trace is not None:
                lr_trace.append((iteration, lr))
            loss, batch_correct = update(x, y, lr, iteration)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, iteration, loss)
            loss_sum += loss * len(idx)
            correct += batch_correct
            seen += len(idx)
            ran += 1
        if seen:
            logger.debug(
                f"epoch {epoch + 1}/{epochs}: loss {loss_sum / seen:.4f}, "
                f"batch acc {correct / seen:.4f}"
            )
    return ran


def trainable_parameters(net: Network):
    """Names, arrays and freeze masks of the weight-trained parameters"""
    params, frozen = {}, {}
    for idx in net.prunable_indices():
        layer = net.layers[idx]
        if layer.precision != FULL32:
            continue
        params[f"{idx}.weight"] = layer.weights
        if layer.mask is not None:
            frozen[f"{idx}.weight"] = layer.mask
        if layer.bias is not None:
            params[f"{idx}.bias"] = layer.bias
    return params, frozen


def train(
    net: Network,
    data: "Dataset",
    opt: Optimizer,
    sched: LrSchedule,
    epochs: int,
    seed: int,
    *,
    batch_size: int = 32,
    start_iteration: int = 0,
    hook: Optional[Callable] = None,
    augmenter: Optional[Callable] = None,
    lr_trace: Optional[list] = None,
) -> Network:
    """Weight training with SGD; returns a trained copy of ``net``.

    Masks are held fixed and masked weights never change. The optimizer's
    velocity is updated in place so callers can checkpoint it.
    """
    net = net.copy()
    if epochs == 0:
        return net
    params, _ = trainable_parameters(net)

    def update(x, y, lr, iteration):
        # masks can change between iterations (gradual pruning hooks)
        _, frozen = trainable_parameters(net)
        loss, grads, logits = loss_and_grads(net, x, y)
        flat_grads = {}
        for name in params:
            idx, part = name.split(".")
            dw, db = grads[int(idx)]
            flat_grads[name] = dw if part == "weight" else db
        opt.step(params, flat_grads, lr, frozen)
        return loss, int(np.sum(np.argmax(logits, axis=1) == y))

    run_iterations(
        net,
        data,
        sched,
        epochs,
        seed,
        update,
        batch_size=batch_size,
        start_iteration=start_iteration,
        hook=hook,
        augmenter=augmenter,
        lr_trace=lr_trace,
    )
    accuracy = evaluate(net, data)
    logger.info(f"Trained {net.arch} for {epochs} epochs, train accuracy {accuracy:.4f}")
    return net


def evaluate(net: Network, data: "Dataset", batch_size: int = 256, workers: int = 1) -> float:
    """Top-1 accuracy; ties in argmax go to the lowest class index.

    Chunks are fixed by ``batch_size`` and only distributed over
    ``workers``, so the result never depends on the worker count.
    """
    n = len(data)
    if n == 0:
        raise DatasetError("Cannot evaluate on an empty dataset")
    labels = np.asarray(data.labels)
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise DatasetError(f"labels must be in [0, {net.num_classes})")
    starts = list(range(0, n, batch_size))

    def count(start):
        logits = forward(net, data.images[start:start + batch_size])
        return int(np.sum(np.argmax(logits, axis=1) == labels[start:start + batch_size]))

    if workers <= 1 or len(starts) == 1:
        correct = sum(count(s) for s in starts)
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(starts))) as executor:
            correct = sum(executor.map(count, starts))
    return correct / n


# ---------------------------------------------------------------------------
# initialization and architectures
# ---------------------------------------------------------------------------

def kaiming_std(fan_in):
    return math.sqrt(2.0 / fan_in)


def kaiming_normal(rng, shape, fan_in):
    return (rng.standard_normal(shape) * kaiming_std(fan_in)).astype(np.float32)


def dense_layer(rng, in_features, out_features, bias=True):
    weights = kaiming_normal(rng, (out_features, in_features), in_features)
    return Layer(
        DENSE,
        weights=weights,
        bias=np.zeros(out_features, dtype=np.float32) if bias else None,
    )


def conv_layer(rng, in_channels, out_channels, kernel=3, padding=1, bias=True):
    fan_in = in_channels * kernel * kernel
    weights = kaiming_normal(rng, (out_channels, in_channels, kernel, kernel), fan_in)
    return Layer(
        CONV2D,
        weights=weights,
        bias=np.zeros(out_channels, dtype=np.float32) if bias else None,
        padding=padding,
    )


def build_mlp(input_shape, num_classes, hidden=(64, 64), seed=0, bias=True):
    """MLP d-h-h-c; image inputs are flattened by the first dense layer"""
    rng = np.random.default_rng(seed)
    layers = []
    width = int(np.prod(input_shape))
    for h in hidden:
        layers += [dense_layer(rng, width, h, bias), Layer(RELU)]
        width = h
    layers += [dense_layer(rng, width, num_classes, bias), Layer(SOFTMAX_OUTPUT)]
    return Network(layers, tuple(input_shape), num_classes, arch="mlp")


def build_conv2(input_shape, num_classes, channels=(8, 16), kernel=3, seed=0, bias=True):
    """Two 3x3 conv layers, global average pooling and a dense classifier"""
    if len(input_shape) != 3:
        raise DimensionError("conv2 expects (C, H, W) inputs", actual=input_shape)
    rng = np.random.default_rng(seed)
    layers = []
    in_c = input_shape[0]
    for out_c in channels:
        layers += [conv_layer(rng, in_c, out_c, kernel, kernel // 2, bias), Layer(RELU)]
        in_c = out_c
    layers += [
        Layer(GLOBAL_AVG_POOL),
        dense_layer(rng, in_c, num_classes, bias),
        Layer(SOFTMAX_OUTPUT),
    ]
    return Network(layers, tuple(input_shape), num_classes, arch="conv2")


ARCHITECTURES = {"mlp": build_mlp, "conv2": build_conv2}


def build_network(arch, input_shape, num_classes, seed=0, **kwargs):
    try:
        builder = ARCHITECTURES[arch]
    except KeyError:
        raise ValueError(f"Unknown architecture {arch!r}, choose from {sorted(ARCHITECTURES)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in kwargs.items()}
    return builder(tuple(input_shape), num_classes, seed=seed, **kwargs)


def make_schedule(training, epochs=None):
    """LrSchedule from a training config section"""
    epochs = epochs if epochs is not None else int(training["epochs"])
    return LrSchedule(
        kind=training.get("schedule", "constant"),
        base_lr=float(training["lr"]),
        total_epochs=max(1, epochs),
        step_points=[tuple(p) for p in training.get("step_points", [])],
    )


def make_optimizer(training):
    return Optimizer(
        momentum=float(training.get("momentum", 0.9)),
        weight_decay=float(training.get("weight_decay", 0.0)),
    )
