import csv
import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from cli import cli
from datasets import load_dataset
from deck import save_deck_manifest
from version import __version__

TINY_TRAINING = {
    "training": {
        "epochs": 1, "batch_size": 16, "lr": 0.05, "momentum": 0.9,
        "weight_decay": 0.0, "schedule": "constant", "step_points": [],
    },
    "gate": {"P": 5, "M": 4},
}


def invoke(*args):
    result = CliRunner().invoke(cli, ["--log-level", "ERROR", *[str(a) for a in args]])
    return result


@pytest.fixture
def workspace(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump(TINY_TRAINING))
    result = invoke("generate", "--classes", 2, "--count", 40, "--dims", "8,8,1", "--out", tmp_path / "data")
    assert result.exit_code == 0, result.output
    return tmp_path, config


@pytest.fixture
def trained(workspace):
    tmp_path, config = workspace
    model = tmp_path / "models" / "dense.ckpt"
    result = invoke("train", "--data", tmp_path / "data" / "train.yaml", "--arch", "mlp",
                    "--config", config, "--out", model)
    assert result.exit_code == 0, result.output
    return model


def test_version():
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_generate_writes_manifests(workspace):
    tmp_path, _ = workspace
    train = load_dataset(tmp_path / "data" / "train.yaml")
    test = load_dataset(tmp_path / "data" / "test.yaml")
    assert len(train) == 30 and len(test) == 10
    assert train.image_shape == (1, 8, 8)


def test_generate_rejects_uneven_count(tmp_path):
    result = invoke("generate", "--classes", 3, "--count", 40, "--out", tmp_path)
    assert result.exit_code == 1
    assert "not divisible" in result.output


def test_train_saves_checkpoint(trained):
    assert trained.read_bytes()[:4] == b"CDCK"


def test_prune_with_method(workspace):
    tmp_path, config = workspace
    out = tmp_path / "models" / "ft.ckpt"
    result = invoke("prune", "--data", tmp_path / "data" / "train.yaml",
                    "--test", tmp_path / "data" / "test.yaml", "--method", "ft", "--target", 0.5,
                    "--arch", "mlp", "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    row = json.loads(result.output.strip().splitlines()[-1])
    assert row["method"] == "ft"
    assert float(row["achieved_sparsity"]) == pytest.approx(0.5, abs=0.01)
    assert row["corrupted_acc"] != ""
    with open(f"{out}.csv") as f:
        assert list(csv.DictReader(f))[0]["scope"] == "global"


def test_prune_from_run_manifest(workspace):
    tmp_path, config = workspace
    run = tmp_path / "run.yaml"
    run.write_text(yaml.safe_dump({"method": "ep", "target": 0.5, "seed": 1}))
    result = invoke("prune", "--data", tmp_path / "data" / "train.yaml", "--run", run,
                    "--arch", "mlp", "--config", config, "--out", tmp_path / "ep.ckpt")
    assert result.exit_code == 0, result.output
    assert json.loads(result.output.strip().splitlines()[-1])["method"] == "ep"


def test_prune_needs_a_method(workspace):
    tmp_path, _ = workspace
    result = invoke("prune", "--data", tmp_path / "data" / "train.yaml", "--out", tmp_path / "x.ckpt")
    assert result.exit_code == 2


def test_unknown_method_is_a_clean_error(workspace):
    tmp_path, config = workspace
    result = invoke("prune", "--data", tmp_path / "data" / "train.yaml", "--method", "snip",
                    "--config", config, "--out", tmp_path / "x.ckpt")
    assert result.exit_code == 1
    assert "Unknown method" in result.output


def test_heatmap_outputs(workspace, trained):
    tmp_path, _ = workspace
    stem = tmp_path / "maps" / "dense"
    result = invoke("heatmap", "--model", trained, "--data", tmp_path / "data" / "test.yaml",
                    "--eps", 3, "--samples", 5, "--baseline", trained, "--out", stem)
    assert result.exit_code == 0, result.output
    for suffix in (".csv", ".pgm", ".png", "-diff.csv", "-diff.pgm"):
        assert (tmp_path / "maps" / f"dense-eps3{suffix}").exists()
    with open(tmp_path / "maps" / "dense-eps3-diff.csv") as f:
        assert all(float(r["error"]) == 0.0 for r in csv.DictReader(f))


def test_spectra(workspace):
    tmp_path, _ = workspace
    out = tmp_path / "spectra.csv"
    result = invoke("spectra", "--data", tmp_path / "data" / "test.yaml", "--corruption", "box-blur:3",
                    "--samples", 4, "--out", out)
    assert result.exit_code == 0, result.output
    with open(out) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["label", "bin0", "bin1", "bin2", "bin3", "bin4"]
    assert rows[1][0] == "mean-spectrum-box-blur-3"
    assert len(rows) == 6


def test_gate_build_and_query(workspace):
    tmp_path, config = workspace
    manifest = tmp_path / "data" / "train.yaml"
    for aug in ("clean", "gaussian"):
        result = invoke("gate-build", "--aug", aug, "--manifest", manifest, "--config", config,
                        "--out", tmp_path / "gates" / f"{aug}.idx")
        assert result.exit_code == 0, result.output
    sidecar = json.loads((tmp_path / "gates" / "clean.idx.json").read_text())
    assert sidecar["P"] == 5 and sidecar["source_hash"]

    batch = tmp_path / "batch.npy"
    np.save(batch, load_dataset(tmp_path / "data" / "test.yaml").images[:4])
    result = invoke("gate-query", "--indexes", tmp_path / "gates" / "clean.idx",
                    "--indexes", tmp_path / "gates" / "gaussian.idx", "--batch", batch)
    assert result.exit_code == 0, result.output
    decision = json.loads(result.output)
    assert decision["batch_size"] == 4
    assert set(decision["distances"]) == {"clean", "gaussian"}
    assert len(decision["selected"]) >= 1


def test_deck_eval(workspace, trained):
    tmp_path, config = workspace
    manifest = tmp_path / "deck.json"
    save_deck_manifest(manifest, [{"checkpoint": str(trained), "augmentation_id": "clean"}])
    out = tmp_path / "deck.csv"
    result = invoke("deck-eval", "--deck", manifest, "--data", tmp_path / "data" / "test.yaml",
                    "--corruptions", "contrast", "--severities", 1, "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    assert result.output.startswith("agnostic")
    with open(out) as f:
        labels = [row[0] for row in csv.reader(f)]
    assert labels == ["dataset", "clean", "contrast-1", "mean-corrupted", "memory-bits"]


def test_grid_with_empty_config(tmp_path):
    config = tmp_path / "grid.yaml"
    config.write_text("experiment: empty\n")
    result = invoke("grid", "--config", config, "--out", tmp_path / "run")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "run" / "cards.csv").exists()


def test_grid_needs_config(tmp_path):
    assert invoke("grid", "--out", tmp_path).exit_code == 2
