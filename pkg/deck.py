"""
Cards (compressed networks tagged with their training augmentation) and
decks of cards, served either by averaging every card or by averaging only
the cards of the augmentation group the spectral gate selects.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from checkpoint import load_network
from errors import DeckError
from gate import GateDecision, SignatureIndex, load_index, select
from nn_core import PRECISION_BITS, Network, predict_proba

logger = logging.getLogger(__name__)

MODES = ("agnostic", "adaptive")


def network_memory_bits(net: Network) -> int:
    """Nonzero weights times precision bits; biases are not counted"""
    return sum(
        layer.nonzero_count() * PRECISION_BITS[layer.precision] for layer in net.prunable_layers()
    )


def dense_memory_bits(net: Network) -> int:
    """Footprint of the same architecture stored dense at 32 bits"""
    return 32 * net.total_weights()


def compression_ratio(dense_bits, bits):
    return dense_bits / bits if bits else float("inf")


def mbit(bits):
    return bits / 1e6


@dataclass
class Card:
    network: Network
    augmentation_id: str
    method: str = "dense"
    scope: str = "global"
    achieved_sparsity: float = 0.0
    forward_count: int = field(default=0, compare=False)

    def __post_init__(self):
        self._lock = threading.Lock()

    @property
    def memory_bits(self):
        return network_memory_bits(self.network)

    def predict(self, batch):
        """Softmax rows for a batch; counts forward passes"""
        with self._lock:
            self.forward_count += 1
        return predict_proba(self.network, batch)

    def describe(self):
        return {
            "augmentation_id": self.augmentation_id,
            "method": self.method,
            "scope": self.scope,
            "achieved_sparsity": self.achieved_sparsity,
            "memory_bits": self.memory_bits,
        }


def memory_bits(card: Card) -> int:
    return card.memory_bits


class Deck:
    def __init__(self, cards: List[Card], gate: Optional[Dict[str, SignatureIndex]] = None):
        self.cards = list(cards)
        self.gate = dict(gate or {})
        self.groups = OrderedDict()
        for k, card in enumerate(self.cards):
            self.groups.setdefault(card.augmentation_id, []).append(k)

    def __len__(self):
        return len(self.cards)

    @property
    def memory_bits(self):
        return sum(card.memory_bits for card in self.cards)

    def reset_counters(self):
        for card in self.cards:
            card.forward_count = 0

    def forward_counts(self):
        return [card.forward_count for card in self.cards]


def _mean_of_cards(deck: Deck, indices, batch, workers):
    def run(k):
        return deck.cards[k].predict(batch)

    if workers <= 1 or len(indices) == 1:
        outputs = [run(k) for k in indices]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(indices))) as executor:
            outputs = list(executor.map(run, indices))
    total = outputs[0].copy()
    for out in outputs[1:]:
        total += out
    return total / len(outputs)


def predict_agnostic(deck: Deck, batch, workers=1):
    """Mean softmax over every card, accumulated in card order"""
    if not deck.cards:
        raise DeckError("Deck has no cards")
    return _mean_of_cards(deck, list(range(len(deck))), batch, workers)


def route(deck: Deck, batch) -> GateDecision:
    missing = [a for a in deck.groups if a not in deck.gate]
    if missing:
        raise DeckError(f"Adaptive mode needs a gate index for {missing}")
    return select(list(deck.gate.values()), batch)


def predict_adaptive(deck: Deck, batch, workers=1):
    """Mean softmax over the cards of the selected augmentation(s) only.

    Returns (probabilities, decision); unselected cards never run.
    """
    if not deck.cards:
        raise DeckError("Deck has no cards")
    decision = route(deck, batch)
    indices = []
    for aug in decision.selected:
        if aug not in deck.groups:
            raise DeckError(f"Gate selected '{aug}' but the deck has no card for it")
        indices.extend(deck.groups[aug])
    return _mean_of_cards(deck, sorted(indices), batch, workers), decision


def predict(deck: Deck, batch, mode="agnostic", workers=1):
    if mode == "agnostic":
        return predict_agnostic(deck, batch, workers), None
    if mode == "adaptive":
        return predict_adaptive(deck, batch, workers)
    raise DeckError(f"Unknown mode {mode!r}, choose from {MODES}")


@dataclass
class DeckReport:
    mode: str
    clean_acc: float
    corrupted: Dict[str, float]
    memory_bits: int
    gating: Dict[str, Dict[str, int]]

    @property
    def mean_corrupted(self):
        if not self.corrupted:
            return None
        return float(np.mean(list(self.corrupted.values())))


def _deck_accuracy(deck, data, mode, M, workers, histogram):
    correct = 0
    for start in range(0, len(data), M):
        batch = data.images[start:start + M]
        probs, decision = predict(deck, batch, mode, workers)
        correct += int(np.sum(np.argmax(probs, axis=1) == data.labels[start:start + M]))
        if decision is not None:
            for aug in decision.selected:
                histogram[aug] = histogram.get(aug, 0) + 1
    return correct / len(data)


def evaluate_deck(deck: Deck, clean_set, corruption_suite, mode="agnostic", M=32, workers=1):
    """Accuracy on the clean set and each (label, dataset) corruption, routing
    once per batch of M images in adaptive mode"""
    if len(clean_set) == 0:
        raise DeckError("Clean set is empty")
    gating = {}
    histogram = {}
    clean_acc = _deck_accuracy(deck, clean_set, mode, M, workers, histogram)
    if mode == "adaptive":
        gating["clean"] = histogram
    corrupted = {}
    for label, data in corruption_suite:
        histogram = {}
        corrupted[label] = _deck_accuracy(deck, data, mode, M, workers, histogram)
        if mode == "adaptive":
            gating[label] = histogram
    report = DeckReport(mode, clean_acc, corrupted, deck.memory_bits, gating)
    logger.info(
        f"Deck ({len(deck)} cards, {mode}): clean {clean_acc:.4f}, "
        f"mean corrupted {report.mean_corrupted}"
    )
    return report


def write_deck_report(report: DeckReport, path):
    augs = sorted({a for hist in report.gating.values() for a in hist})
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["dataset", "accuracy"] + [f"gated_{a}" for a in augs])
        rows = [("clean", report.clean_acc)] + list(report.corrupted.items())
        for label, acc in rows:
            hist = report.gating.get(label, {})
            writer.writerow([label, f"{acc:.6f}"] + [hist.get(a, 0) for a in augs])
        if report.corrupted:
            writer.writerow(["mean-corrupted", f"{report.mean_corrupted:.6f}"] + [""] * len(augs))
        writer.writerow(["memory-bits", report.memory_bits] + [""] * len(augs))


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def save_deck_manifest(path, cards, gate_paths=None, mode="agnostic"):
    """cards: dicts with checkpoint, augmentation_id and optional metadata"""
    if mode not in MODES:
        raise DeckError(f"Unknown mode {mode!r}")
    manifest = {"mode": mode, "cards": list(cards), "gate": dict(gate_paths or {})}
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_deck(path):
    """Deck and mode from a JSON manifest; relative paths resolve against it"""
    with open(path, "r") as f:
        manifest = json.load(f)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    mode = manifest.get("mode", "agnostic")
    if mode not in MODES:
        raise DeckError(f"Unknown mode {mode!r} in {path}")
    cards = []
    for entry in manifest.get("cards", []):
        try:
            net = load_network(resolve(entry["checkpoint"]))
            cards.append(
                Card(
                    net,
                    entry["augmentation_id"],
                    method=entry.get("method", "dense"),
                    scope=entry.get("scope", "global"),
                    achieved_sparsity=float(entry.get("achieved_sparsity", net.sparsity())),
                )
            )
        except KeyError as e:
            raise DeckError(f"Card entry in {path} is missing {e}")
    if not cards:
        raise DeckError(f"{path} lists no cards")
    gate = {aug: load_index(resolve(p)) for aug, p in manifest.get("gate", {}).items()}
    for aug, index in gate.items():
        if index.augmentation_id != aug:
            logger.warning(f"Index for '{aug}' was built as '{index.augmentation_id}'")
            index.augmentation_id = aug
    return Deck(cards, gate), mode
