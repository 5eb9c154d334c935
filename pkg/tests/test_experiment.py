import csv
import json

import pytest

from deck import load_deck
from experiment import ExperimentRunner, GridConfig, mean_ci95, run_experiment, trend_comparisons


def tiny_grid():
    return {
        "experiment": "tiny",
        "dataset": {"seed": 0, "classes": 2, "count": 40, "dims": [8, 8, 1], "test_fraction": 0.25},
        "architectures": [{"name": "mlp", "hidden": [8]}],
        "training": {
            "epochs": 1, "batch_size": 16, "lr": 0.05, "momentum": 0.9,
            "weight_decay": 0.0, "schedule": "constant", "step_points": [],
        },
        "methods": ["ft"],
        "sparsities": [0.5],
        "augmentations": ["clean", "gaussian"],
        "seeds": [0],
        "heatmap": {"eps": [3], "samples": 4},
        "corruptions": {"kinds": ["contrast"], "severities": [1]},
        "gate": {"P": 10, "M": 5},
        "decks": [{"method": "ft", "sparsity": 0.5, "augmentations": ["clean", "gaussian"], "sizes": [2]}],
    }


def read_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


class TestGridConfig:
    def test_cells_include_a_dense_baseline_per_seed(self):
        grid = GridConfig.from_dict(tiny_grid())
        names = [c.name for c in grid.cells()]
        assert names == sorted(names)
        assert names == [
            "mlp-clean-dense-seed0",
            "mlp-clean-ft-p0.5-global-seed0",
            "mlp-gaussian-dense-seed0",
            "mlp-gaussian-ft-p0.5-global-seed0",
        ]

    def test_method_scopes_override_grid_scopes(self):
        config = tiny_grid()
        config["methods"] = [{"method": "gmp", "name": "gmp-layer", "scopes": ["layerwise"]}]
        grid = GridConfig.from_dict(config)
        pruned = [c for c in grid.cells() if c.method == "gmp"]
        assert {c.scope for c in pruned} == {"layerwise"}
        assert pruned[0].name.startswith("mlp-clean-gmp-layer-p0.5-layerwise")

    def test_no_methods_no_cells(self):
        config = tiny_grid()
        config["methods"] = []
        assert GridConfig.from_dict(config).cells() == []

    def test_corruption_specs(self):
        labels = [s.label for s in GridConfig.from_dict(tiny_grid()).corruption_specs()]
        assert labels == ["contrast-1"]


def test_empty_grid_writes_empty_report(tmp_path):
    result = run_experiment({}, tmp_path)
    assert result.ok and result.cells == []
    with open(tmp_path / "cards.csv") as f:
        assert f.readline().startswith("cell,arch,augmentation")
        assert f.read() == ""
    with open(tmp_path / "summary.json") as f:
        assert json.load(f)["cells"] == 0
    assert (tmp_path / "config.yaml").exists()


@pytest.mark.slow
def test_tiny_grid_end_to_end(tmp_path):
    first = tmp_path / "first"
    result = run_experiment(tiny_grid(), first, workers=2)
    assert result.ok, result.failures
    assert len(result.cells) == 4

    rows = {r["cell"]: r for r in read_rows(first / "cards.csv")}
    assert rows["mlp-clean-dense-seed0"]["clean_rel_pp"] == "0.000"
    assert float(rows["mlp-clean-ft-p0.5-global-seed0"]["achieved_sparsity"]) == pytest.approx(0.5, abs=0.01)
    assert (first / "heatmaps" / "mlp-clean-dense-seed0-eps3.csv").exists()
    assert (first / "diff" / "mlp-gaussian-ft-p0.5-global-seed0-eps3.pgm").exists()
    assert (first / "gates" / "gaussian.idx.json").exists()
    assert (first / "cells" / "mlp-clean-ft-p0.5-global-seed0" / "run.yaml").exists()

    decks = read_rows(first / "decks.csv")
    assert [d["mode"] for d in decks] == ["agnostic", "adaptive"]
    deck, mode = load_deck(first / "decks" / "mlp-ft-p0.5-n2.json")
    assert mode == "adaptive"
    assert len(deck) == 2 and set(deck.gate) == {"clean", "gaussian"}

    second = tmp_path / "second"
    run_experiment(tiny_grid(), second, workers=1)
    comparisons = read_rows(first / "comparisons.csv")
    assert [c["check"] for c in comparisons] == ["adaptive-ge-agnostic"]
    assert comparisons[0]["left"] == "mlp-ft-p0.5-n2:adaptive"
    assert comparisons[0]["holds"] in ("yes", "no")

    for name in ("cards.csv", "corruptions.csv", "trends.csv", "decks.csv", "comparisons.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.slow
def test_rerun_resumes_finished_cells(tmp_path):
    run_experiment(tiny_grid(), tmp_path)
    result_path = tmp_path / "cells" / "mlp-clean-dense-seed0" / "result.json"
    stored = json.loads(result_path.read_text())
    stored["clean_acc"] = 0.125
    result_path.write_text(json.dumps(stored))

    run_experiment(tiny_grid(), tmp_path)
    rows = {r["cell"]: r for r in read_rows(tmp_path / "cards.csv")}
    assert rows["mlp-clean-dense-seed0"]["clean_acc"] == "0.125000"


def cell_result(method, seed, clean, corrupted, sparsity=0.95, variant=None):
    return {
        "arch": "conv2", "augmentation": "clean", "scope": "global",
        "method": method, "variant": variant or method, "seed": seed,
        "nominal_sparsity": 0.0 if method == "dense" else sparsity,
        "clean_acc": clean, "corrupted_acc": corrupted,
    }


def deck_summary(mode, replicate, corrupted):
    return {
        "deck": f"conv2-lrr-p0.95-n2-r{replicate}", "group": "conv2-lrr-p0.95-n2",
        "arch": "conv2", "variant": "lrr", "scope": "global", "sparsity": 0.95,
        "augmentations": "mix+gaussian", "cards": 2, "mode": mode,
        "clean_acc": 0.9, "corrupted_acc": corrupted,
    }


class TestTrendComparisons:
    def test_mean_ci95(self):
        mean, half = mean_ci95([0.5, 0.7, None])
        assert mean == pytest.approx(0.6)
        assert half == pytest.approx(1.96 * 0.1414213562 / 2 ** 0.5, rel=1e-6)
        assert mean_ci95([0.4]) == (0.4, 0.0)
        assert mean_ci95([None]) == (None, None)

    def test_robust_methods_against_ft(self):
        results = [
            cell_result("ft", 0, 0.90, 0.50), cell_result("ft", 1, 0.90, 0.52),
            cell_result("lrr", 0, 0.90, 0.60), cell_result("lrr", 1, 0.90, 0.62),
            cell_result("ep", 0, 0.90, 0.45), cell_result("ep", 1, 0.90, 0.47),
            cell_result("gmp", 0, 0.90, 0.70),
        ]
        rows = {r[5]: r for r in trend_comparisons(results) if r[0] == "corrupted-ge-ft"}
        assert set(rows) == {"lrr", "ep"}
        assert rows["lrr"][11] == "10.000" and rows["lrr"][12] == "yes"
        assert rows["ep"][11] == "-5.000" and rows["ep"][12] == "no"
        assert rows["lrr"][8] == "ft" and rows["lrr"][9] == "0.510000"

    def test_no_ft_no_rows(self):
        results = [cell_result("lrr", 0, 0.9, 0.6)]
        assert trend_comparisons(results) == []

    def test_clean_accuracy_near_dense(self):
        results = [
            cell_result("dense", 0, 0.92, 0.6), cell_result("dense", 1, 0.94, 0.6),
            cell_result("ft", 0, 0.91, 0.5), cell_result("ft", 1, 0.91, 0.5),
            cell_result("ep", 0, 0.80, 0.5, sparsity=0.5),
        ]
        rows = {r[0]: r for r in trend_comparisons(results) if r[0].startswith("clean-within")}
        assert rows["clean-within-3pp"][11] == "-2.000"
        assert rows["clean-within-3pp"][12] == "yes"
        assert rows["clean-within-5pp"][11] == "-13.000"
        assert rows["clean-within-5pp"][12] == "no"

    def test_adaptive_against_agnostic_over_replicates(self):
        decks = [
            deck_summary("agnostic", 0, 0.50), deck_summary("adaptive", 0, 0.56),
            deck_summary("agnostic", 1, 0.54), deck_summary("adaptive", 1, 0.58),
        ]
        (row,) = trend_comparisons([], decks)
        assert row[0] == "adaptive-ge-agnostic"
        assert row[2] == "mix+gaussian"
        assert (row[6], row[9]) == ("0.570000", "0.520000")
        assert float(row[7]) > 0.0
        assert row[11] == "5.000" and row[12] == "yes"

    def test_agnostic_only_group_is_skipped(self):
        assert trend_comparisons([], [deck_summary("agnostic", 0, 0.5)]) == []


class TestDeckManifestMode:
    @pytest.fixture
    def runner(self, tmp_path):
        return ExperimentRunner(GridConfig(), str(tmp_path))

    def write(self, runner, tmp_path, gates):
        runner._write_deck_manifest("d", [], ["clean", "gaussian"], gates)
        return json.loads((tmp_path / "decks" / "d.json").read_text())

    def test_partially_gated_deck_is_agnostic(self, runner, tmp_path):
        manifest = self.write(runner, tmp_path, {"gaussian": object()})
        assert manifest["mode"] == "agnostic"
        assert manifest["gate"] == {"gaussian": "../gates/gaussian.idx"}

    def test_fully_gated_deck_is_adaptive(self, runner, tmp_path):
        manifest = self.write(runner, tmp_path, {"clean": object(), "gaussian": object(), "mix": object()})
        assert manifest["mode"] == "adaptive"
        assert set(manifest["gate"]) == {"clean", "gaussian"}

    def test_ungated_deck_is_agnostic(self, runner, tmp_path):
        assert self.write(runner, tmp_path, {})["mode"] == "agnostic"


@pytest.mark.slow
def test_deck_replicates_split_seeds(tmp_path):
    config = tiny_grid()
    config["seeds"] = [0, 1]
    config["decks"] = [{"method": "ft", "sparsity": 0.5, "augmentations": ["clean", "gaussian"],
                        "sizes": [2], "replicates": 2}]
    result = run_experiment(config, tmp_path)
    assert result.ok, result.failures
    decks = read_rows(tmp_path / "decks.csv")
    assert sorted({d["deck"] for d in decks}) == ["mlp-ft-p0.5-n2-r0", "mlp-ft-p0.5-n2-r1"]
    assert {d["group"] for d in decks} == {"mlp-ft-p0.5-n2"}
    first = json.loads((tmp_path / "decks" / "mlp-ft-p0.5-n2-r0.json").read_text())
    second = json.loads((tmp_path / "decks" / "mlp-ft-p0.5-n2-r1.json").read_text())
    assert all("seed0" in c["checkpoint"] for c in first["cards"])
    assert all("seed1" in c["checkpoint"] for c in second["cards"])
    (row,) = [r for r in read_rows(tmp_path / "comparisons.csv") if r["check"] == "adaptive-ge-agnostic"]
    assert row["left_ci95"] != ""
