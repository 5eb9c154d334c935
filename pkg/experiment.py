"""
Experiment grid runner.

A YAML config enumerates architectures, method variants, sparsities, scopes,
augmentations and seeds. Every combination is a cell: train/prune one card,
evaluate it clean and under the corruption suite, and render its Fourier
heatmaps. Cells run in a thread pool and persist their result next to a
checkpoint, so an interrupted run resumes where it stopped. The report is
assembled afterwards in sorted cell order and contains no timestamps.

Output layout:
    config.yaml (copy of the grid config)
    cells/<cell>/run.yaml, model.ckpt, result.json, heatmap-eps<e>.npy
    heatmaps/<cell>-eps<e>.csv|.pgm, diff/<cell>-eps<e>.csv|.pgm
    gates/<augmentation>.idx (+ .json sidecar), decks/<deck>.json
    cards.csv, corruptions.csv, trends.csv, decks.csv, comparisons.csv, summary.json
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from augmentations import (
    CORRUPTION_KINDS,
    AugmentationSpec,
    build_suite,
    corruption_suite,
    gate_pool,
    make_augmenter,
)
from checkpoint import load_network, save_network
from datasets import generate_dataset
from deck import (
    Card,
    Deck,
    compression_ratio,
    dense_memory_bits,
    evaluate_deck,
    mbit,
    network_memory_bits,
    save_deck_manifest,
)
from gate import build_index, save_index
from nn_core import build_network, evaluate
from prune import PruneRun, prune_run_from_dict, run_method, save_prune_run
from settings import ToolkitConfig, default_workers
from spectral import Heatmap, diff_heatmap, heatmap, write_heatmap_csv, write_heatmap_pgm

logger = logging.getLogger(__name__)


@dataclass
class Cell:
    arch: str
    arch_options: dict
    augmentation: AugmentationSpec
    variant: dict
    sparsity: float
    scope: str
    seed: int

    @property
    def method(self):
        return self.variant["method"]

    @property
    def name(self):
        if self.method == "dense":
            return f"{self.arch}-{self.augmentation.augmentation_id}-dense-seed{self.seed}"
        return (
            f"{self.arch}-{self.augmentation.augmentation_id}-{self.variant['name']}"
            f"-p{self.sparsity:g}-{self.scope}-seed{self.seed}"
        )

    @property
    def baseline_name(self):
        return f"{self.arch}-{self.augmentation.augmentation_id}-dense-seed{self.seed}"


@dataclass
class GridConfig:
    experiment: str = "grid"
    dataset: dict = field(default_factory=dict)
    architectures: List[dict] = field(default_factory=list)
    training: dict = field(default_factory=dict)
    methods: List[dict] = field(default_factory=list)
    sparsities: List[float] = field(default_factory=list)
    scopes: List[str] = field(default_factory=lambda: ["global"])
    augmentations: List[AugmentationSpec] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    heatmap: dict = field(default_factory=dict)
    gate: dict = field(default_factory=dict)
    decks: List[dict] = field(default_factory=list)
    corruptions: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, config):
        config = config or {}
        archs = []
        for entry in config.get("architectures", []) or []:
            if isinstance(entry, str):
                archs.append({"name": entry})
            else:
                archs.append(dict(entry))
        methods = []
        for entry in config.get("methods", []) or []:
            if isinstance(entry, str):
                entry = {"method": entry}
            entry = dict(entry)
            entry.setdefault("name", entry["method"])
            methods.append(entry)
        decks = config.get("decks", []) or []
        if isinstance(decks, dict):
            decks = [decks]
        return cls(
            experiment=config.get("experiment", "grid"),
            dataset=ToolkitConfig.get_section(config, "dataset", {}),
            architectures=archs,
            training=ToolkitConfig.get_training(config),
            methods=methods,
            sparsities=[float(s) for s in config.get("sparsities", []) or []],
            scopes=list(config.get("scopes", ["global"]) or ["global"]),
            augmentations=[
                AugmentationSpec.from_config(a) for a in config.get("augmentations", []) or []
            ],
            seeds=[int(s) for s in config.get("seeds", []) or []],
            heatmap=ToolkitConfig.get_section(config, "heatmap", {}),
            gate=ToolkitConfig.get_gate(config),
            decks=list(decks),
            corruptions=ToolkitConfig.get_section(config, "corruptions", {}),
        )

    def cells(self):
        cells = []
        pruned = [m for m in self.methods if m["method"] != "dense"]
        if not self.methods:
            return cells
        dense_variant = {"name": "dense", "method": "dense"}
        for arch in self.architectures:
            options = {k: v for k, v in arch.items() if k != "name"}
            for aug in self.augmentations:
                for seed in self.seeds:
                    cells.append(Cell(arch["name"], options, aug, dense_variant, 0.0, "global", seed))
                    for variant in pruned:
                        for sparsity in self.sparsities:
                            for scope in variant.get("scopes", self.scopes):
                                cells.append(
                                    Cell(arch["name"], options, aug, variant, sparsity, scope, seed)
                                )
        return sorted(cells, key=lambda c: c.name)

    def corruption_specs(self):
        kinds = self.corruptions.get("kinds", list(CORRUPTION_KINDS))
        severities = self.corruptions.get("severities", [1, 3, 5])
        return corruption_suite(kinds, [int(s) for s in severities])


@dataclass
class ExperimentResult:
    out_dir: str
    cells: List[dict]
    failures: List[dict]
    decks: List[dict]

    @property
    def ok(self):
        return not self.failures


def _write_json(path, data):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value):
    return "" if value is None else f"{value:.6f}"


def mean_ci95(values):
    """Mean and 95% half-width over seeds; (None, None) when there is nothing to average"""
    values = np.array([v for v in values if v is not None], dtype=float)
    if len(values) == 0:
        return None, None
    half = 1.96 * values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return float(values.mean()), float(half)


COMPARISON_HEADER = [
    "check", "arch", "augmentation", "scope", "sparsity",
    "left", "left_mean", "left_ci95", "right", "right_mean", "right_ci95",
    "delta_pp", "holds",
]
ROBUST_METHODS = ("lrr", "ep", "bp")
# (method, sparsity, tolerance in percentage points) for clean accuracy against dense
NEAR_DENSE = (("ft", 0.95, 3.0), ("ep", 0.5, 5.0))


def _comparison(check, key, left, left_rows, right, right_rows, metric, tolerance=0.0):
    arch, augmentation, scope, sparsity = key
    left_mean, left_ci = mean_ci95(r[metric] for r in left_rows)
    right_mean, right_ci = mean_ci95(r[metric] for r in right_rows)
    delta, holds = None, ""
    if left_mean is not None and right_mean is not None:
        delta = 100.0 * (left_mean - right_mean)
        holds = "yes" if delta >= -tolerance else "no"
    return [
        check, arch, augmentation, scope, _fmt(sparsity),
        left, _fmt(left_mean), _fmt(left_ci), right, _fmt(right_mean), _fmt(right_ci),
        "" if delta is None else f"{delta:.3f}", holds,
    ]


def trend_comparisons(results, decks=()):
    """Compare seed means of cell results and deck summaries.

    Three families of rows:
      corrupted-ge-ft        LRR, EP and BP corrupted accuracy against FT at the same sparsity
      clean-within-Npp       FT at 95% and EP at 50% clean accuracy against the dense card
      adaptive-ge-agnostic   adaptive against agnostic deck corrupted accuracy, per deck group

    ``holds`` only tests the direction of the means (minus the tolerance for the
    dense rows). The 95% half-widths sit next to them for reading, not testing.
    """
    dense, pruned = {}, {}
    for r in results:
        if r["method"] == "dense":
            dense.setdefault((r["arch"], r["augmentation"]), []).append(r)
        else:
            key = (r["arch"], r["augmentation"], r["scope"], round(float(r["nominal_sparsity"]), 6))
            pruned.setdefault(key, {}).setdefault(r["method"], []).append(r)

    rows = []
    for key in sorted(pruned):
        by_method = pruned[key]
        if "ft" not in by_method:
            continue
        for method in ROBUST_METHODS:
            if method in by_method:
                rows.append(_comparison("corrupted-ge-ft", key, method, by_method[method],
                                        "ft", by_method["ft"], "corrupted_acc"))
    for method, sparsity, tolerance in NEAR_DENSE:
        for key in sorted(pruned):
            arch, augmentation, _, s = key
            if not math.isclose(s, sparsity) or method not in pruned[key]:
                continue
            if (arch, augmentation) not in dense:
                continue
            rows.append(_comparison(f"clean-within-{tolerance:g}pp", key, method, pruned[key][method],
                                    "dense", dense[(arch, augmentation)], "clean_acc", tolerance))

    groups: Dict[tuple, dict] = {}
    for d in decks:
        key = (d["arch"], d["augmentations"], d["scope"], float(d["sparsity"]), d["group"])
        groups.setdefault(key, {}).setdefault(d["mode"], []).append(d)
    for key in sorted(groups):
        modes = groups[key]
        if "adaptive" not in modes or "agnostic" not in modes:
            continue
        group = key[4]
        rows.append(_comparison("adaptive-ge-agnostic", key[:4], f"{group}:adaptive", modes["adaptive"],
                                f"{group}:agnostic", modes["agnostic"], "corrupted_acc"))
    return rows


class ExperimentRunner:
    def __init__(self, config: GridConfig, out_dir, workers=None):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers or default_workers()
        self.cells_dir = os.path.join(out_dir, "cells")
        self.train = self.test = None
        self.suite = []
        self.heatmap_set = None

    # -- data -------------------------------------------------------------

    def prepare_data(self):
        ds = self.config.dataset
        dims = ds.get("dims", [16, 16, 3])
        self.train, self.test = generate_dataset(
            int(ds.get("seed", 0)),
            int(ds.get("classes", 4)),
            int(ds.get("count", 800)),
            dims,
            float(ds.get("test_fraction", 0.25)),
        )
        self.suite = build_suite(self.test, self.config.corruption_specs(), int(ds.get("seed", 0)))
        samples = int(self.config.heatmap.get("samples", len(self.test)))
        self.heatmap_set = self.test.subset(np.arange(min(samples, len(self.test))))

    # -- cells ------------------------------------------------------------

    def cell_dir(self, cell: Cell):
        return os.path.join(self.cells_dir, cell.name)

    def run_cell(self, cell: Cell):
        cell_dir = self.cell_dir(cell)
        result_path = os.path.join(cell_dir, "result.json")
        if os.path.exists(result_path):
            with open(result_path, "r") as f:
                logger.info(f"Cell {cell.name}: resumed from {result_path}")
                return json.load(f)
        os.makedirs(cell_dir, exist_ok=True)
        logger.info(f"Cell {cell.name}: starting")

        net = build_network(
            cell.arch, self.train.image_shape, self.train.num_classes, seed=cell.seed,
            **cell.arch_options
        )
        spec = dict(cell.variant)
        spec.update({"target": cell.sparsity, "scope": cell.scope, "seed": cell.seed})
        run: PruneRun = prune_run_from_dict(spec, self.config.training)
        save_prune_run(run, os.path.join(cell_dir, "run.yaml"))
        augmenter = make_augmenter(cell.augmentation, self.train.value_range)
        trained = run_method(net, self.train, run, augmenter)
        save_network(trained, os.path.join(cell_dir, "model.ckpt"))

        corrupted = {label: evaluate(trained, data) for label, data in self.suite}
        for eps in self.config.heatmap.get("eps", []):
            h = heatmap(trained, self.heatmap_set, float(eps), cell.seed, model_id=cell.name)
            np.save(os.path.join(cell_dir, f"heatmap-eps{eps:g}.npy"), h.grid)

        result = {
            "cell": cell.name,
            "arch": cell.arch,
            "augmentation": cell.augmentation.augmentation_id,
            "variant": cell.variant["name"],
            "method": cell.method,
            "scope": cell.scope,
            "seed": cell.seed,
            "nominal_sparsity": run.nominal_sparsity,
            "formula_sparsity": run.formula_sparsity,
            "achieved_sparsity": trained.sparsity(),
            "clean_acc": evaluate(trained, self.test),
            "corrupted": corrupted,
            "corrupted_acc": float(np.mean(list(corrupted.values()))) if corrupted else None,
            "memory_bits": network_memory_bits(trained),
            "dense_bits": dense_memory_bits(trained),
        }
        _write_json(result_path, result)
        logger.info(
            f"Cell {cell.name}: clean {result['clean_acc']:.4f}, "
            f"sparsity {result['achieved_sparsity']:.4f}"
        )
        return result

    def _guarded(self, cell):
        try:
            return self.run_cell(cell), None
        except Exception as e:
            logger.error(f"Cell {cell.name} failed: {e}")
            logger.debug(traceback.format_exc())
            return None, {"cell": cell.name, "error": f"{type(e).__name__}: {e}"}

    # -- report -----------------------------------------------------------

    def run(self) -> ExperimentResult:
        os.makedirs(self.out_dir, exist_ok=True)
        cells = self.config.cells()
        if not cells:
            logger.info("Empty grid, writing an empty report")
            self._write_cards([])
            _write_json(os.path.join(self.out_dir, "summary.json"),
                        {"experiment": self.config.experiment, "cells": 0, "failures": []})
            return ExperimentResult(self.out_dir, [], [], [])

        self.prepare_data()
        with ThreadPoolExecutor(max_workers=min(self.workers, len(cells))) as executor:
            outcomes = list(executor.map(self._guarded, cells))
        results = [r for r, _ in outcomes if r is not None]
        failures = [f for _, f in outcomes if f is not None]

        self._write_cards(results)
        self._write_corruptions(results)
        self._write_trends(results)
        self._write_heatmaps(cells, results)
        gates = self._build_gates(failures)
        decks = self._run_decks(cells, results, gates, failures)
        comparisons = trend_comparisons(results, decks)
        _write_csv(os.path.join(self.out_dir, "comparisons.csv"), COMPARISON_HEADER, comparisons)
        not_holding = [row for row in comparisons if row[-1] == "no"]
        for row in not_holding:
            logger.warning(f"{row[0]}: {row[5]} {row[6]} vs {row[8]} {row[9]} ({row[1]}, {row[2]})")

        failures = sorted(failures, key=lambda f: f["cell"])
        _write_json(
            os.path.join(self.out_dir, "summary.json"),
            {
                "experiment": self.config.experiment,
                "cells": len(cells),
                "completed": len(results),
                "failures": failures,
                "decks": len(decks),
                "comparisons": len(comparisons),
                "comparisons_not_holding": len(not_holding),
            },
        )
        return ExperimentResult(self.out_dir, results, failures, decks)

    def _dense_means(self, results):
        groups: Dict[tuple, list] = {}
        for r in results:
            if r["method"] == "dense":
                groups.setdefault((r["arch"], r["augmentation"]), []).append(r)
        means = {}
        for key, rows in groups.items():
            clean = float(np.mean([r["clean_acc"] for r in rows]))
            corr = [r["corrupted_acc"] for r in rows if r["corrupted_acc"] is not None]
            means[key] = (clean, float(np.mean(corr)) if corr else None)
        return means

    def _write_cards(self, results):
        header = [
            "cell", "arch", "augmentation", "variant", "method", "scope", "seed",
            "nominal_sparsity", "achieved_sparsity", "clean_acc", "corrupted_acc",
            "memory_bits", "memory_mbit", "compression_ratio",
            "clean_rel_pp", "corrupted_rel_pp",
        ]
        means = self._dense_means(results)
        rows = []
        for r in sorted(results, key=lambda r: r["cell"]):
            dense = means.get((r["arch"], r["augmentation"]))
            clean_rel = corr_rel = None
            if dense is not None:
                clean_rel = 100.0 * (r["clean_acc"] - dense[0])
                if dense[1] is not None and r["corrupted_acc"] is not None:
                    corr_rel = 100.0 * (r["corrupted_acc"] - dense[1])
            bits = r["memory_bits"]
            rows.append([
                r["cell"], r["arch"], r["augmentation"], r["variant"], r["method"], r["scope"],
                r["seed"], _fmt(r["nominal_sparsity"]), _fmt(r["achieved_sparsity"]),
                _fmt(r["clean_acc"]), _fmt(r["corrupted_acc"]), bits, f"{mbit(bits):.6f}",
                f"{compression_ratio(r['dense_bits'], bits):.3f}" if bits else "",
                "" if clean_rel is None else f"{clean_rel:.3f}",
                "" if corr_rel is None else f"{corr_rel:.3f}",
            ])
        _write_csv(os.path.join(self.out_dir, "cards.csv"), header, rows)

    def _write_corruptions(self, results):
        rows = []
        for r in sorted(results, key=lambda r: r["cell"]):
            for label in sorted(r["corrupted"]):
                rows.append([r["cell"], label, _fmt(r["corrupted"][label])])
        _write_csv(os.path.join(self.out_dir, "corruptions.csv"), ["cell", "corruption", "accuracy"], rows)

    def _write_trends(self, results):
        """Mean and 95% interval over seeds per (arch, augmentation, variant,
        sparsity, scope); descriptive only"""
        groups: Dict[tuple, list] = {}
        for r in results:
            key = (r["arch"], r["augmentation"], r["variant"], r["nominal_sparsity"], r["scope"])
            groups.setdefault(key, []).append(r)
        rows = []
        for key in sorted(groups):
            rs = groups[key]
            row = list(key[:3]) + [_fmt(key[3]), key[4], len(rs)]
            for metric in ("clean_acc", "corrupted_acc"):
                mean, half = mean_ci95(r[metric] for r in rs)
                row += [_fmt(mean), _fmt(half)]
            rows.append(row)
        header = [
            "arch", "augmentation", "variant", "sparsity", "scope", "seeds",
            "clean_mean", "clean_ci95", "corrupted_mean", "corrupted_ci95",
        ]
        _write_csv(os.path.join(self.out_dir, "trends.csv"), header, rows)

    def _write_heatmaps(self, cells, results):
        done = {r["cell"] for r in results}
        heat_dir = os.path.join(self.out_dir, "heatmaps")
        diff_dir = os.path.join(self.out_dir, "diff")
        for eps in self.config.heatmap.get("eps", []):
            for cell in cells:
                if cell.name not in done:
                    continue
                grid = self._load_grid(cell.name, eps)
                h = Heatmap(grid, float(eps), cell.name)
                os.makedirs(heat_dir, exist_ok=True)
                stem = os.path.join(heat_dir, f"{cell.name}-eps{eps:g}")
                write_heatmap_csv(h, f"{stem}.csv")
                write_heatmap_pgm(h, f"{stem}.pgm", signed=False)
                if cell.method == "dense" or cell.baseline_name not in done:
                    continue
                base = Heatmap(self._load_grid(cell.baseline_name, eps), float(eps), cell.baseline_name)
                d = diff_heatmap(h, base)
                os.makedirs(diff_dir, exist_ok=True)
                stem = os.path.join(diff_dir, f"{cell.name}-eps{eps:g}")
                write_heatmap_csv(d, f"{stem}.csv")
                write_heatmap_pgm(d, f"{stem}.pgm", signed=True)

    def _load_grid(self, name, eps):
        return np.load(os.path.join(self.cells_dir, name, f"heatmap-eps{eps:g}.npy"))

    # -- gates and decks --------------------------------------------------

    def _build_gates(self, failures):
        if not self.config.decks:
            return {}
        gate_dir = os.path.join(self.out_dir, "gates")
        os.makedirs(gate_dir, exist_ok=True)
        P = int(self.config.gate["P"])
        seed = int(self.config.dataset.get("seed", 0))
        gates = {}
        for k, aug in enumerate(self.config.augmentations):
            try:
                pool = gate_pool(self.train, aug, [seed, k])
                index = build_index(pool.images, aug.augmentation_id, min(P, len(pool)), seed)
                save_index(index, os.path.join(gate_dir, f"{aug.augmentation_id}.idx"))
                gates[aug.augmentation_id] = index
            except Exception as e:
                logger.error(f"Gate for {aug.augmentation_id} failed: {e}")
                failures.append({"cell": f"gate-{aug.augmentation_id}", "error": str(e)})
        return gates

    def _run_decks(self, cells, results, gates, failures):
        done = {r["cell"] for r in results}
        rows, summaries = [], []
        for spec in self.config.decks:
            variant = spec.get("method", "lrr")
            sparsity = float(spec.get("sparsity", max(self.config.sparsities or [0.0])))
            scope = spec.get("scope", "global")
            augs = spec.get("augmentations", ["mix", "gaussian"])
            replicates = int(spec.get("replicates", 1))
            for arch in self.config.architectures:
                for n in spec.get("sizes", [2]):
                    group = f"{arch['name']}-{variant}-p{sparsity:g}-n{n}"
                    for replicate in range(replicates):
                        name = group if replicates == 1 else f"{group}-r{replicate}"
                        try:
                            deck, entries = self._assemble_deck(
                                cells, done, arch["name"], variant, sparsity, scope, augs,
                                int(n), gates, replicate,
                            )
                            self._write_deck_manifest(name, entries, augs, gates)
                        except Exception as e:
                            logger.error(f"Deck {name} failed: {e}")
                            failures.append({"cell": f"deck-{name}", "error": str(e)})
                            continue
                        base = {
                            "deck": name, "group": group, "arch": arch["name"],
                            "variant": variant, "scope": scope, "sparsity": sparsity,
                            "augmentations": "+".join(augs), "cards": int(n),
                        }
                        for row, summary in self._evaluate_deck(deck, base):
                            rows.append(row)
                            summaries.append(summary)
        if self.config.decks:
            header = ["deck", "group", "mode", "cards", "clean_acc", "corrupted_acc",
                      "memory_bits", "memory_mbit", "clean_gating"]
            _write_csv(os.path.join(self.out_dir, "decks.csv"), header, rows)
        return summaries

    def _evaluate_deck(self, deck, base):
        modes = ["agnostic"]
        if set(deck.groups) <= set(deck.gate):
            modes.append("adaptive")
        else:
            logger.warning(f"Deck {base['deck']}: no gate index for every group, agnostic only")
        for mode in modes:
            report = evaluate_deck(deck, self.test, self.suite, mode, int(self.config.gate["M"]))
            gating = report.gating.get("clean", {})
            row = [
                base["deck"], base["group"], mode, base["cards"], _fmt(report.clean_acc),
                _fmt(report.mean_corrupted), report.memory_bits,
                f"{mbit(report.memory_bits):.6f}",
                ";".join(f"{a}:{gating[a]}" for a in sorted(gating)),
            ]
            summary = dict(base, mode=mode, clean_acc=report.clean_acc,
                           corrupted_acc=report.mean_corrupted)
            yield row, summary

    def _assemble_deck(self, cells, done, arch, variant, sparsity, scope, augs, n, gates,
                       replicate=0):
        """Replicate r takes the r-th run of per-aug cards in seed order"""
        if n % len(augs):
            raise ValueError(f"deck size {n} does not split evenly over {augs}")
        per_aug = n // len(augs)
        needed = (replicate + 1) * per_aug
        cards, entries = [], []
        for aug in augs:
            matching = [
                c for c in cells
                if c.arch == arch and c.augmentation.augmentation_id == aug
                and c.variant["name"] == variant and c.scope == scope
                and (c.method == "dense" or math.isclose(c.sparsity, sparsity))
                and c.name in done
            ]
            matching.sort(key=lambda c: c.seed)
            if len(matching) < needed:
                raise ValueError(f"need {needed} '{aug}' cards for {variant}, found {len(matching)}")
            for c in matching[replicate * per_aug:needed]:
                checkpoint = os.path.join(self.cell_dir(c), "model.ckpt")
                net = load_network(checkpoint)
                cards.append(Card(net, aug, c.method, c.scope, net.sparsity()))
                entries.append({
                    "checkpoint": os.path.relpath(checkpoint, os.path.join(self.out_dir, "decks")),
                    "augmentation_id": aug,
                    "method": c.method,
                    "scope": c.scope,
                    "achieved_sparsity": net.sparsity(),
                })
        return Deck(cards, {a: gates[a] for a in augs if a in gates}), entries

    def _write_deck_manifest(self, name, entries, augs, gates):
        deck_dir = os.path.join(self.out_dir, "decks")
        os.makedirs(deck_dir, exist_ok=True)
        gate_paths = {a: os.path.join("..", "gates", f"{a}.idx") for a in augs if a in gates}
        # adaptive only when every group can be routed to
        mode = "adaptive" if set(augs) <= set(gates) else "agnostic"
        save_deck_manifest(os.path.join(deck_dir, f"{name}.json"), entries, gate_paths, mode)


def run_experiment(config, out_dir, workers=None) -> ExperimentResult:
    """Run a grid from a config path or an already loaded mapping"""
    if isinstance(config, (str, os.PathLike)):
        config = ToolkitConfig.load_config(config)
    grid = GridConfig.from_dict(config)
    os.makedirs(out_dir, exist_ok=True)
    ToolkitConfig.save_config(config or {}, os.path.join(out_dir, "config.yaml"))
    result = ExperimentRunner(grid, out_dir, workers).run()
    if result.failures:
        logger.warning(f"{len(result.failures)} grid item(s) failed")
    return result
