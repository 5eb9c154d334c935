"""
Pruning framework: one train/prune/retrain cycle instantiated six ways.

    ft   train, prune once, fine-tune at the final learning rate
    gmp  prune gradually during training on a cubic sparsity schedule
    lth  iterative magnitude pruning, rewind weights and lr schedule
    lrr  iterative magnitude pruning, rewind only the lr schedule
    ep   learn a mask over frozen signed-constant weights
    bp   learn a mask over binarized weights with a per-layer gain

Ranking ties (equal magnitudes or scores) are broken by flat index through
stable sorts, layers ordered as in the network.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import yaml

from errors import PruneError, ScheduleError
from nn_core import (
    BINARY1,
    LrSchedule,
    Network,
    iterations_per_epoch,
    kaiming_std,
    loss_and_grads,
    lr_at,
    make_optimizer,
    make_schedule,
    run_iterations,
    train,
)
from settings import DEFAULT_TRAINING

logger = logging.getLogger(__name__)

GLOBAL = "global"
LAYERWISE = "layerwise"
METHODS = ("dense", "ft", "gmp", "lth", "lrr", "ep", "bp")
REWIND_MODES = {"lth": "weights_and_lr", "lrr": "lr_only"}
DEFAULT_REWIND_FRACTION = 0.03


@dataclass(frozen=True)
class PruneScope:
    kind: str = GLOBAL

    def __post_init__(self):
        if self.kind not in (GLOBAL, LAYERWISE):
            raise PruneError(f"Unknown scope {self.kind!r}, use 'global' or 'layerwise'")


@dataclass(frozen=True)
class GmpSchedule:
    s_i: float
    s_f: float
    t0: int
    n: int
    dt: int = 1

    def __post_init__(self):
        if not 0 <= self.s_i < 1 or not 0 < self.s_f <= 1:
            raise ScheduleError(f"sparsities out of range: s_i={self.s_i}, s_f={self.s_f}")
        if self.s_i > self.s_f:
            raise ScheduleError(f"s_i={self.s_i} exceeds s_f={self.s_f}")
        if self.n < 1 or self.dt < 1 or self.t0 < 0:
            raise ScheduleError(f"need n >= 1, dt >= 1, t0 >= 0 (got {self.n}, {self.dt}, {self.t0})")

    @property
    def last_step(self):
        return self.t0 + self.n * self.dt

    @property
    def steps(self):
        return range(self.t0, self.last_step + 1, self.dt)

    def is_step(self, t):
        return self.t0 <= t <= self.last_step and (t - self.t0) % self.dt == 0


def gmp_sparsity(t: int, sched: GmpSchedule) -> float:
    """Cubic sparsity ramp, defined only on the scheduled pruning steps"""
    if not sched.is_step(t):
        raise ScheduleError(
            f"step {t} is not a pruning step (t0={sched.t0}, n={sched.n}, dt={sched.dt})"
        )
    progress = (t - sched.t0) / (sched.n * sched.dt)
    return sched.s_f + (sched.s_i - sched.s_f) * (1.0 - progress) ** 3


def default_gmp_schedule(total_iterations, target):
    """Ramp from 5% to 60% of training, at most ~60 pruning events"""
    t0 = max(0, total_iterations // 20)
    dt = max(1, total_iterations // 100)
    n = max(1, (int(0.6 * total_iterations) - t0) // dt)
    return GmpSchedule(0.0, target, t0, n, dt)


@dataclass
class RewindConfig:
    target_sparsity: float
    per_shot_rate: float = 0.2
    rewind_iter: Optional[int] = None
    mode: str = "lr_only"
    shots: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.target_sparsity < 1:
            raise PruneError(f"target sparsity must be in (0, 1), got {self.target_sparsity}")
        if not 0 < self.per_shot_rate < 1:
            raise PruneError(f"per-shot rate must be in (0, 1), got {self.per_shot_rate}")
        if self.mode not in REWIND_MODES.values():
            raise PruneError(f"Unknown rewind mode {self.mode!r}")
        if self.shots is not None and self.shots < 1:
            raise PruneError(f"shots must be >= 1, got {self.shots}")

    @property
    def num_shots(self):
        if self.shots is not None:
            return self.shots
        return shots_for(self.target_sparsity, self.per_shot_rate)

    @property
    def rate(self):
        """Per-shot rate; derived from the target when shots are fixed"""
        if self.shots is not None:
            return 1.0 - (1.0 - self.target_sparsity) ** (1.0 / self.shots)
        return self.per_shot_rate

    def shot_sparsity(self, shot):
        return 1.0 - (1.0 - self.rate) ** shot

    @property
    def achieved_sparsity(self):
        return self.shot_sparsity(self.num_shots)


def shots_for(target, rate):
    # guard against 10.000000001 style float noise before the ceil
    return max(1, math.ceil(round(math.log(1.0 - target) / math.log(1.0 - rate), 9)))


@dataclass
class ScoreState:
    scores: List[np.ndarray]
    seed: int

    def __post_init__(self):
        self.scores = [np.asarray(s, dtype=np.float32) for s in self.scores]


@dataclass
class PruneRun:
    """Configuration plus the state a run accumulates"""

    method: str
    target_sparsity: float = 0.0
    scope: PruneScope = field(default_factory=PruneScope)
    training: Dict = field(default_factory=lambda: dict(DEFAULT_TRAINING))
    seed: int = 0
    finetune_epochs: Optional[int] = None
    gmp: Optional[GmpSchedule] = None
    rewind: Optional[RewindConfig] = None

    lr_trace: list = field(default_factory=list)
    # rewinding: one (iteration, lr) trace per retraining shot
    shot_lr_traces: list = field(default_factory=list)
    sparsity_trace: list = field(default_factory=list)
    rewind_checkpoint: Optional[dict] = None
    trained_weights: Optional[list] = None
    rewound_weights: Optional[list] = None
    score_state: Optional[ScoreState] = None
    achieved_sparsity: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise PruneError(f"Unknown method {self.method!r}, choose from {METHODS}")
        if not 0 <= self.target_sparsity < 1:
            raise PruneError(f"target sparsity must be in [0, 1), got {self.target_sparsity}")
        if isinstance(self.scope, str):
            self.scope = PruneScope(self.scope)
        if self.method in REWIND_MODES and self.rewind is None and self.target_sparsity > 0:
            self.rewind = RewindConfig(self.target_sparsity, mode=REWIND_MODES[self.method])

    @property
    def epochs(self):
        return int(self.training["epochs"])

    @property
    def batch_size(self):
        return int(self.training.get("batch_size", 32))

    @property
    def nominal_sparsity(self):
        return self.target_sparsity

    @property
    def formula_sparsity(self):
        """What the method promises: 1 - (1 - rate)^shots for rewinding"""
        if self.rewind is not None:
            return self.rewind.achieved_sparsity
        return self.target_sparsity


# ---------------------------------------------------------------------------
# mask selection
# ---------------------------------------------------------------------------

def _drop_lowest_global(values, candidates, count):
    """Drop ``count`` lowest-valued candidates pooled over layers, never
    emptying a layer. Returns new keep-masks."""
    keep = [c.copy() for c in candidates]
    if count <= 0:
        return keep
    flat_vals, owners, positions = [], [], []
    for li, (vals, cand) in enumerate(zip(values, candidates)):
        idx = np.flatnonzero(cand.reshape(-1))
        flat_vals.append(vals.reshape(-1)[idx])
        owners.append(np.full(len(idx), li))
        positions.append(idx)
    flat_vals = np.concatenate(flat_vals)
    owners = np.concatenate(owners)
    positions = np.concatenate(positions)
    order = np.argsort(flat_vals, kind="stable")
    survivors = np.array([int(c.sum()) for c in candidates])

    chosen = order[:count]
    dropped = np.bincount(owners[chosen], minlength=len(candidates))
    if np.all(survivors - dropped >= 1):
        for li in range(len(candidates)):
            sel = positions[chosen[owners[chosen] == li]]
            keep[li].reshape(-1)[sel] = False
        return keep

    # some layer would empty out: walk the order and skip each layer's last survivor
    removed = 0
    for o in order:
        li = owners[o]
        if survivors[li] <= 1:
            continue
        keep[li].reshape(-1)[positions[o]] = False
        survivors[li] -= 1
        removed += 1
        if removed == count:
            return keep
    raise PruneError(
        f"Cannot prune {count} weights without emptying a layer "
        f"({int(sum(c.sum() for c in candidates))} candidates over {len(candidates)} layers)"
    )


def _drop_lowest_layer(values, candidate, count):
    keep = candidate.copy()
    if count <= 0:
        return keep
    idx = np.flatnonzero(candidate.reshape(-1))
    order = np.argsort(values.reshape(-1)[idx], kind="stable")
    keep.reshape(-1)[idx[order[:count]]] = False
    return keep


def _check_sparsity(sparsity):
    if not 0 <= sparsity < 1:
        raise PruneError(f"sparsity must be in [0, 1), got {sparsity}")


def _candidates(net):
    return [
        np.ones(layer.weights.shape, dtype=bool) if layer.mask is None else layer.mask.copy()
        for layer in net.prunable_layers()
    ]


def magnitude_mask(net: Network, sparsity: float, scope: PruneScope = PruneScope()):
    """Masks with floor(sparsity * candidates) more smallest-|w| survivors removed"""
    _check_sparsity(sparsity)
    candidates = _candidates(net)
    magnitudes = [np.abs(layer.weights) for layer in net.prunable_layers()]
    if scope.kind == GLOBAL:
        count = math.floor(sparsity * sum(int(c.sum()) for c in candidates))
        return _drop_lowest_global(magnitudes, candidates, count)
    return [
        _drop_lowest_layer(m, c, math.floor(sparsity * int(c.sum())))
        for m, c in zip(magnitudes, candidates)
    ]


def prune_to_sparsity(net: Network, target: float, scope: PruneScope = PruneScope()):
    """Extend the masks in place until floor(target * total) weights are pruned
    (per layer for layerwise scope). Returns the achieved sparsity."""
    _check_sparsity(target)
    layers = net.prunable_layers()
    candidates = _candidates(net)
    magnitudes = [np.abs(layer.weights) for layer in layers]
    if scope.kind == GLOBAL:
        total = sum(layer.weights.size for layer in layers)
        pruned = total - sum(int(c.sum()) for c in candidates)
        masks = _drop_lowest_global(magnitudes, candidates, math.floor(target * total) - pruned)
    else:
        masks = []
        for layer, m, c in zip(layers, magnitudes, candidates):
            need = math.floor(target * layer.weights.size) - (layer.weights.size - int(c.sum()))
            masks.append(_drop_lowest_layer(m, c, need))
    net.set_masks(masks)
    return net.sparsity()


def score_masks(scores, sparsity, scope: PruneScope = PruneScope()):
    """Keep the top (1 - sparsity) fraction of scores, globally or per layer"""
    _check_sparsity(sparsity)
    candidates = [np.ones(s.shape, dtype=bool) for s in scores]
    if scope.kind == GLOBAL:
        count = math.floor(sparsity * sum(s.size for s in scores))
        return _drop_lowest_global(scores, candidates, count)
    return [
        _drop_lowest_layer(s, c, math.floor(sparsity * s.size))
        for s, c in zip(scores, candidates)
    ]


def binarize_gain(weights, mask):
    """Mean |w| over unpruned positions"""
    if mask is not None and not mask.any():
        raise PruneError("Layer is fully pruned, binarization gain is undefined")
    values = np.abs(weights.astype(np.float64))
    return float(values[mask].mean() if mask is not None else values.mean())


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------

def _snapshot(net):
    return [
        (layer.weights.copy(), None if layer.bias is None else layer.bias.copy())
        for layer in net.prunable_layers()
    ]


def _restore(net, snapshot):
    for layer, (weights, bias) in zip(net.prunable_layers(), snapshot):
        layer.weights[...] = weights
        if bias is not None:
            layer.bias[...] = bias


def _final_lr(sched: LrSchedule, epochs, ipe):
    return lr_at(sched, (epochs * ipe - 1) / ipe)


def run_dense(net, data, run: PruneRun, augmenter=None):
    opt = make_optimizer(run.training)
    sched = make_schedule(run.training)
    trained = train(net, data, opt, sched, run.epochs, run.seed, batch_size=run.batch_size,
                    augmenter=augmenter, lr_trace=run.lr_trace)
    run.achieved_sparsity = trained.sparsity()
    return trained


def run_ft(net, data, run: PruneRun, augmenter=None):
    """Train, prune once to the target, fine-tune at the final learning rate"""
    opt = make_optimizer(run.training)
    sched = make_schedule(run.training)
    trained = train(net, data, opt, sched, run.epochs, run.seed, batch_size=run.batch_size,
                    augmenter=augmenter, lr_trace=run.lr_trace)
    achieved = prune_to_sparsity(trained, run.target_sparsity, run.scope)
    run.sparsity_trace.append((len(run.lr_trace), run.target_sparsity, achieved))
    logger.info(f"FT pruned to {achieved:.4f} (target {run.target_sparsity})")

    ft_epochs = run.finetune_epochs if run.finetune_epochs is not None else run.epochs // 4
    if ft_epochs > 0:
        ipe = iterations_per_epoch(len(data), run.batch_size)
        final_lr = _final_lr(sched, run.epochs, ipe)
        ft_sched = LrSchedule("constant", final_lr, ft_epochs)
        trace = []
        trained = train(trained, data, opt, ft_sched, ft_epochs, run.seed + 1,
                        batch_size=run.batch_size, augmenter=augmenter, lr_trace=trace)
        offset = run.epochs * ipe
        run.lr_trace.extend((offset + it, lr) for it, lr in trace)
    run.achieved_sparsity = trained.sparsity()
    return trained


def run_gmp(net, data, run: PruneRun, augmenter=None):
    """Prune at every scheduled step to the cubic ramp value"""
    ipe = iterations_per_epoch(len(data), run.batch_size)
    total = run.epochs * ipe
    sched = run.gmp or default_gmp_schedule(total, run.target_sparsity)
    if not math.isclose(sched.s_f, run.target_sparsity):
        raise ScheduleError(f"GMP final sparsity {sched.s_f} != target {run.target_sparsity}")
    if sched.last_step >= total:
        raise ScheduleError(
            f"GMP schedule ends at step {sched.last_step} but training has {total} iterations"
        )

    def hook(iteration, current):
        if sched.is_step(iteration):
            target = gmp_sparsity(iteration, sched)
            achieved = prune_to_sparsity(current, target, run.scope)
            run.sparsity_trace.append((iteration, target, achieved))
            logger.debug(f"GMP step {iteration}: target {target:.5f}, achieved {achieved:.5f}")

    opt = make_optimizer(run.training)
    trained = train(net, data, opt, make_schedule(run.training), run.epochs, run.seed,
                    batch_size=run.batch_size, hook=hook, augmenter=augmenter,
                    lr_trace=run.lr_trace)
    run.achieved_sparsity = trained.sparsity()
    logger.info(f"GMP finished at sparsity {run.achieved_sparsity:.4f}")
    return trained


def run_rewinding(net, data, run: PruneRun, augmenter=None):
    """LTH / LRR: prune a share of survivors per shot, rewind, retrain from r"""
    cfg = run.rewind
    if cfg is None:
        raise PruneError(f"{run.method} needs a rewind configuration")
    ipe = iterations_per_epoch(len(data), run.batch_size)
    total = run.epochs * ipe
    r = cfg.rewind_iter if cfg.rewind_iter is not None else int(DEFAULT_REWIND_FRACTION * total)
    if not 0 <= r < total:
        raise PruneError(f"rewind iteration {r} must be in [0, {total})")

    opt = make_optimizer(run.training)
    sched = make_schedule(run.training)

    def capture(iteration, current):
        if iteration == r:
            run.rewind_checkpoint = {
                "iteration": r,
                "weights": _snapshot(current),
                "optimizer": opt.state_dict(),
            }

    run.rewind_checkpoint = None
    current = train(net, data, opt, sched, run.epochs, run.seed, batch_size=run.batch_size,
                    hook=capture, augmenter=augmenter, lr_trace=run.lr_trace)
    if run.rewind_checkpoint is None:
        raise PruneError(f"rewind checkpoint at iteration {r} was never captured")

    for shot in range(1, cfg.num_shots + 1):
        target = cfg.shot_sparsity(shot)
        achieved = prune_to_sparsity(current, target, run.scope)
        run.sparsity_trace.append((shot, target, achieved))
        run.trained_weights = _snapshot(current)
        if cfg.mode == "weights_and_lr":
            _restore(current, run.rewind_checkpoint["weights"])
        opt.load_state_dict(run.rewind_checkpoint["optimizer"])
        run.rewound_weights = _snapshot(current)
        logger.info(
            f"{run.method.upper()} shot {shot}/{cfg.num_shots}: sparsity {achieved:.4f}, "
            f"retraining from iteration {r}"
        )
        trace = []
        current = train(current, data, opt, sched, run.epochs, run.seed,
                        batch_size=run.batch_size, start_iteration=r,
                        augmenter=augmenter, lr_trace=trace)
        run.shot_lr_traces.append(trace)
    run.achieved_sparsity = current.sparsity()
    return current


def signed_constant(net: Network):
    """Copy with weights sign(w) * sqrt(2 / fan_in), tagged binary1, zero biases"""
    work = net.copy()
    for layer in work.prunable_layers():
        const = np.float32(kaiming_std(layer.fan_in))
        layer.weights = np.where(layer.weights >= 0, const, -const).astype(np.float32)
        layer.precision = BINARY1
        layer.alpha = float(const)
        layer.mask = None
        if layer.bias is not None:
            layer.bias = np.zeros_like(layer.bias)
    return work


def init_scores(net: Network, seed) -> ScoreState:
    rng = np.random.default_rng([seed, 7919])
    return ScoreState(
        [
            rng.uniform(0.0, math.sqrt(6.0 / layer.fan_in), size=layer.weights.shape)
            for layer in net.prunable_layers()
        ],
        seed,
    )


def _train_scores(work, data, run, latent, effective_of, augmenter):
    """Straight-through score training: d loss / d score = d loss / d W_eff * W_latent"""
    indices = work.prunable_indices()
    state = init_scores(work, run.seed)
    for idx, scores in zip(indices, state.scores):
        work.layers[idx].scores = scores
    run.score_state = state
    params = {f"{idx}.scores": work.layers[idx].scores for idx in indices}
    opt = make_optimizer(run.training)

    def refresh_masks():
        masks = score_masks(work.scores, run.target_sparsity, run.scope)
        work.set_masks(masks)
        return masks

    def update(x, y, lr, iteration):
        masks = refresh_masks()
        effective = {idx: effective_of(idx, m) for idx, m in zip(indices, masks)}
        loss, grads, logits = loss_and_grads(work, x, y, effective=effective)
        score_grads = {f"{idx}.scores": grads[idx][0] * latent[idx] for idx in indices}
        opt.step(params, score_grads, lr)
        return loss, int(np.sum(np.argmax(logits, axis=1) == y))

    refresh_masks()
    run_iterations(work, data, make_schedule(run.training), run.epochs, run.seed, update,
                   batch_size=run.batch_size, augmenter=augmenter, lr_trace=run.lr_trace)
    return refresh_masks()


def run_ep(net, data, run: PruneRun, augmenter=None):
    """Mask search over frozen signed-constant weights"""
    work = signed_constant(net)
    latent = {idx: work.layers[idx].weights.astype(np.float64) for idx in work.prunable_indices()}

    def effective_of(idx, mask):
        return work.layers[idx].weights * mask.astype(np.float32)

    _train_scores(work, data, run, latent, effective_of, augmenter)
    run.achieved_sparsity = work.sparsity()
    logger.info(f"EP finished at sparsity {run.achieved_sparsity:.4f}")
    return work


def run_bp(net, data, run: PruneRun, augmenter=None):
    """Mask search over alpha * sign(w0) with alpha = mean |w0| of survivors"""
    work = net.copy()
    for layer in work.prunable_layers():
        layer.mask = None
        if layer.bias is not None:
            layer.bias = np.zeros_like(layer.bias)
    indices = work.prunable_indices()
    latent = {idx: work.layers[idx].weights.astype(np.float64) for idx in indices}
    signs = {idx: np.where(latent[idx] >= 0, 1.0, -1.0) for idx in indices}

    def effective_of(idx, mask):
        alpha = binarize_gain(latent[idx], mask)
        return (alpha * signs[idx] * mask).astype(np.float32)

    # scores train against the latent weights; freeze them as full32 meanwhile
    masks = _train_scores(work, data, run, latent, effective_of, augmenter)
    for idx, mask in zip(indices, masks):
        layer = work.layers[idx]
        alpha = binarize_gain(latent[idx], mask)
        layer.weights = (alpha * signs[idx]).astype(np.float32)
        layer.precision = BINARY1
        layer.alpha = alpha
    run.achieved_sparsity = work.sparsity()
    logger.info(f"BP finished at sparsity {run.achieved_sparsity:.4f}")
    return work


RUNNERS = {
    "dense": run_dense,
    "ft": run_ft,
    "gmp": run_gmp,
    "lth": run_rewinding,
    "lrr": run_rewinding,
    "ep": run_ep,
    "bp": run_bp,
}


def run_method(net, data, run: PruneRun, augmenter=None):
    logger.info(
        f"Running {run.method} ({run.scope.kind}, target {run.target_sparsity}) "
        f"for {run.epochs} epochs, seed {run.seed}"
    )
    return RUNNERS[run.method](net, data, run, augmenter)


# ---------------------------------------------------------------------------
# manifests and reports
# ---------------------------------------------------------------------------

def prune_run_from_dict(data, training_defaults=None):
    training = dict(training_defaults or DEFAULT_TRAINING)
    training.update(data.get("training", {}) or {})
    method = data["method"]
    target = float(data.get("target", data.get("target_sparsity", 0.0)))
    gmp = None
    if data.get("gmp"):
        g = data["gmp"]
        gmp = GmpSchedule(float(g.get("s_i", 0.0)), target, int(g["t0"]), int(g["n"]),
                          int(g.get("dt", 1)))
    rewind = None
    if method in REWIND_MODES and target > 0:
        r = data.get("rewind", {}) or {}
        rewind = RewindConfig(
            target,
            per_shot_rate=float(r.get("per_shot_rate", 0.2)),
            rewind_iter=r.get("rewind_iter"),
            mode=REWIND_MODES[method],
            shots=data.get("shots", r.get("shots")),
        )
    return PruneRun(
        method=method,
        target_sparsity=target,
        scope=PruneScope(data.get("scope", GLOBAL)),
        training=training,
        seed=int(data.get("seed", 0)),
        finetune_epochs=data.get("finetune_epochs"),
        gmp=gmp,
        rewind=rewind,
    )


def load_prune_run(path, training_defaults=None) -> PruneRun:
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if "method" not in data:
        raise PruneError(f"{path} does not name a pruning method")
    return prune_run_from_dict(data, training_defaults)


def save_prune_run(run: PruneRun, path):
    data = {
        "method": run.method,
        "scope": run.scope.kind,
        "target": run.target_sparsity,
        "seed": run.seed,
        "training": run.training,
    }
    if run.finetune_epochs is not None:
        data["finetune_epochs"] = run.finetune_epochs
    if run.gmp is not None:
        data["gmp"] = {"s_i": run.gmp.s_i, "t0": run.gmp.t0, "n": run.gmp.n, "dt": run.gmp.dt}
    if run.rewind is not None:
        data["rewind"] = {
            "per_shot_rate": run.rewind.per_shot_rate,
            "rewind_iter": run.rewind.rewind_iter,
            "shots": run.rewind.shots,
        }
    with open(path, "w") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)


REPORT_FIELDS = [
    "method",
    "scope",
    "nominal_sparsity",
    "achieved_sparsity",
    "clean_acc",
    "corrupted_acc",
    "memory_bits",
]


def report_row(run: PruneRun, clean_acc, corrupted_acc, memory_bits):
    return {
        "method": run.method,
        "scope": run.scope.kind,
        "nominal_sparsity": f"{run.nominal_sparsity:.6f}",
        "achieved_sparsity": f"{(run.achieved_sparsity or 0.0):.6f}",
        "clean_acc": f"{clean_acc:.6f}",
        "corrupted_acc": "" if corrupted_acc is None else f"{corrupted_acc:.6f}",
        "memory_bits": int(memory_bits),
    }


def write_report(rows, path):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
