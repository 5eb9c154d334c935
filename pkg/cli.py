#!/usr/bin/env python3
"""
Command line entry point.

Every subcommand accepts --seed, --out and --config; the YAML config
supplies training and gate defaults that explicit flags override.
"""
import functools
import json
import logging
import os
import sys

import click
import numpy as np

from augmentations import (
    AugmentationSpec,
    CorruptionSpec,
    augment_dataset,
    build_suite,
    corrupt_dataset,
    gate_pool,
    make_augmenter,
)
from checkpoint import load_network, save_network
from datasets import generate_dataset, load_dataset, save_dataset
from deck import evaluate_deck, load_deck, network_memory_bits, write_deck_report
from errors import CardDeckError
from experiment import run_experiment
from gate import build_index, file_hash, load_index, save_index, select
from nn_core import build_network, evaluate, make_optimizer, make_schedule, train
from prune import load_prune_run, prune_run_from_dict, report_row, run_method, write_report
from settings import ToolkitConfig, configure_logging
from spectral import (
    diff_heatmap,
    heatmap,
    mean_radial_spectrum,
    signatures,
    write_heatmap_csv,
    write_heatmap_pgm,
    write_heatmap_png,
    write_signature_csv,
)
from version import __version__
import web

logger = logging.getLogger(__name__)


def common_options(default_out=None):
    """--seed / --out / --config, shared by all subcommands"""

    def decorator(fn):
        fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                          default=None, help="YAML config with training/gate defaults")(fn)
        fn = click.option("--out", "out", type=click.Path(), default=default_out,
                          required=default_out is None, help="Output path")(fn)
        fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
        return fn

    return decorator


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CardDeckError, ValueError, OSError) as e:
            logger.error(f"{fn.__name__} failed: {e}")
            raise click.ClickException(str(e))

    return wrapper


def _training(config_path, **overrides):
    training = ToolkitConfig.get_training(ToolkitConfig.load_config(config_path))
    training.update({k: v for k, v in overrides.items() if v is not None})
    return training


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _parse_corruptions(kinds, severities):
    return [CorruptionSpec(k, int(s)) for k in kinds for s in severities]


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.version_option(__version__, prog_name="carddeck")
def cli(log_level):
    """Compressed, robust network decks: train, prune, probe, gate and serve."""
    configure_logging(log_level)


@cli.command()
@click.option("--classes", type=int, default=4, show_default=True)
@click.option("--count", type=int, default=800, show_default=True)
@click.option("--dims", default="16,16,3", show_default=True, help="d1,d2,channels")
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@common_options()
@handle_errors
def generate(classes, count, dims, test_fraction, seed, out, config_path):
    """Write a synthetic train/test dataset pair with YAML manifests."""
    dims = [int(d) for d in dims.split(",")]
    train_set, test_set = generate_dataset(seed, classes, count, dims, test_fraction)
    save_dataset(train_set, out, "train", seed)
    save_dataset(test_set, out, "test", seed)
    click.echo(f"wrote {len(train_set)} train / {len(test_set)} test images to {out}")


@cli.command("train")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--arch", default="conv2", show_default=True)
@click.option("--epochs", type=int, default=None)
@click.option("--augmentation", default="clean", show_default=True)
@common_options()
@handle_errors
def train_cmd(data_path, arch, epochs, augmentation, seed, out, config_path):
    """Train a dense network and save its checkpoint."""
    data = load_dataset(data_path)
    training = _training(config_path, epochs=epochs)
    net = build_network(arch, data.image_shape, data.num_classes, seed=seed)
    spec = AugmentationSpec.from_config(augmentation)
    trained = train(net, data, make_optimizer(training), make_schedule(training),
                    int(training["epochs"]), seed, batch_size=int(training["batch_size"]),
                    augmenter=make_augmenter(spec, data.value_range))
    _ensure_parent(out)
    save_network(trained, out)
    click.echo(f"train accuracy {evaluate(trained, data):.4f}, saved {out}")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", type=click.Path(exists=True), default=None)
@click.option("--run", "run_path", type=click.Path(exists=True), default=None,
              help="Prune-run YAML manifest")
@click.option("--method", default=None)
@click.option("--target", type=float, default=None)
@click.option("--scope", default="global", show_default=True)
@click.option("--arch", default="conv2", show_default=True)
@click.option("--augmentation", default="clean", show_default=True)
@common_options()
@handle_errors
def prune(data_path, test_path, run_path, method, target, scope, arch, augmentation,
          seed, out, config_path):
    """Compress a freshly initialized network with one of the six methods."""
    data = load_dataset(data_path)
    training = _training(config_path)
    if run_path:
        run = load_prune_run(run_path, training)
    elif method:
        run = prune_run_from_dict(
            {"method": method, "target": target or 0.0, "scope": scope, "seed": seed}, training
        )
    else:
        raise click.UsageError("give either --run or --method")
    net = build_network(arch, data.image_shape, data.num_classes, seed=run.seed)
    spec = AugmentationSpec.from_config(augmentation)
    pruned = run_method(net, data, run, make_augmenter(spec, data.value_range))
    _ensure_parent(out)
    save_network(pruned, out)

    evaluation = load_dataset(test_path) if test_path else data
    corrupted = None
    if test_path:
        suite = build_suite(evaluation, _parse_corruptions(
            ["gauss-noise", "shot-noise", "box-blur", "contrast", "pixelate"], [1, 3, 5]), seed)
        corrupted = float(np.mean([evaluate(pruned, d) for _, d in suite]))
    row = report_row(run, evaluate(pruned, evaluation), corrupted, network_memory_bits(pruned))
    write_report([row], f"{out}.csv")
    click.echo(json.dumps(row, sort_keys=True))


@cli.command("heatmap")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, multiple=True, default=[3.0], show_default=True)
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--baseline", type=click.Path(exists=True), default=None,
              help="Dense checkpoint for difference heatmaps")
@click.option("--workers", type=int, default=1, show_default=True)
@common_options()
@handle_errors
def heatmap_cmd(model_path, data_path, eps, samples, baseline, workers, seed, out, config_path):
    """Fourier error heatmaps as CSV, PGM and PNG (out is a filename stem)."""
    data = load_dataset(data_path)
    data = data.subset(np.arange(min(samples, len(data))))
    net = load_network(model_path)
    base_net = load_network(baseline) if baseline else None
    _ensure_parent(out)
    for e in eps:
        h = heatmap(net, data, e, seed, workers=workers, model_id=os.path.basename(model_path))
        stem = f"{out}-eps{e:g}"
        write_heatmap_csv(h, f"{stem}.csv")
        write_heatmap_pgm(h, f"{stem}.pgm", signed=False)
        write_heatmap_png(h, f"{stem}.png", signed=False)
        if base_net is not None:
            b = heatmap(base_net, data, e, seed, workers=workers, model_id=os.path.basename(baseline))
            d = diff_heatmap(h, b)
            write_heatmap_csv(d, f"{stem}-diff.csv")
            write_heatmap_pgm(d, f"{stem}-diff.pgm", signed=True)
            write_heatmap_png(d, f"{stem}-diff.png", signed=True)
        click.echo(f"eps={e:g}: mean error {h.grid.mean():.4f} -> {stem}.*")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--augmentation", default=None)
@click.option("--corruption", default=None, help="kind:severity, e.g. box-blur:3")
@click.option("--samples", type=int, default=100, show_default=True)
@common_options()
@handle_errors
def spectra(data_path, augmentation, corruption, samples, seed, out, config_path):
    """Per-image spectral signatures plus the mean radial spectrum as CSV."""
    data = load_dataset(data_path)
    data = data.subset(np.arange(min(samples, len(data))))
    label = "clean"
    if augmentation:
        spec = AugmentationSpec.from_config(augmentation)
        data = augment_dataset(data, spec, seed)
        label = spec.augmentation_id
    if corruption:
        kind, _, severity = corruption.partition(":")
        spec = CorruptionSpec(kind, int(severity or 1))
        data = corrupt_dataset(data, spec, seed)
        label = spec.label
    _ensure_parent(out)
    sigs = signatures(data.images)
    write_signature_csv(
        [(f"mean-spectrum-{label}", mean_radial_spectrum(data.images))]
        + [(f"{label}-{k}", s) for k, s in enumerate(sigs)],
        out,
    )
    click.echo(f"wrote {len(sigs)} signatures to {out}")


@cli.command("gate-build")
@click.option("--aug", "augmentation", required=True)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--P", "P", type=int, default=None)
@common_options()
@handle_errors
def gate_build(augmentation, manifest, P, seed, out, config_path):
    """Build and save a signature index over images carrying one augmentation."""
    gate_cfg = ToolkitConfig.get_gate(ToolkitConfig.load_config(config_path))
    P = P if P is not None else int(gate_cfg["P"])
    data = load_dataset(manifest)
    spec = AugmentationSpec.from_config(augmentation)
    pool = gate_pool(data, spec, seed)
    index = build_index(pool.images, spec.augmentation_id, P, seed, file_hash(manifest))
    _ensure_parent(out)
    save_index(index, out)
    click.echo(f"index '{index.augmentation_id}' P={index.P} R={index.R} -> {out}")


@cli.command("gate-query")
@click.option("--indexes", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--batch", "batch_path", required=True, type=click.Path(exists=True),
              help=".npy array of shape (M, C, H, W)")
@common_options(default_out="-")
@handle_errors
def gate_query(indexes, batch_path, seed, out, config_path):
    """Route one batch and print the gate decision as JSON."""
    batch = np.load(batch_path)
    decision = select([load_index(p) for p in indexes], batch)
    text = json.dumps(decision.to_dict(), indent=2, sort_keys=True)
    if out == "-":
        click.echo(text)
    else:
        _ensure_parent(out)
        with open(out, "w") as f:
            f.write(text + "\n")


@cli.command("deck-eval")
@click.option("--deck", "deck_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["agnostic", "adaptive", "manifest"]),
              default="manifest", show_default=True)
@click.option("--M", "M", type=int, default=None)
@click.option("--corruptions", multiple=True,
              default=["gauss-noise", "shot-noise", "box-blur", "contrast", "pixelate"])
@click.option("--severities", multiple=True, type=int, default=[1, 3, 5])
@click.option("--workers", type=int, default=1, show_default=True)
@common_options()
@handle_errors
def deck_eval(deck_path, data_path, mode, M, corruptions, severities, workers, seed, out,
              config_path):
    """Evaluate a deck on clean and corrupted data, write a CSV report."""
    gate_cfg = ToolkitConfig.get_gate(ToolkitConfig.load_config(config_path))
    deck, manifest_mode = load_deck(deck_path)
    mode = manifest_mode if mode == "manifest" else mode
    data = load_dataset(data_path)
    suite = build_suite(data, _parse_corruptions(corruptions, severities), seed)
    report = evaluate_deck(deck, data, suite, mode, M or int(gate_cfg["M"]), workers)
    _ensure_parent(out)
    write_deck_report(report, out)
    click.echo(
        f"{mode}: clean {report.clean_acc:.4f}, mean corrupted {report.mean_corrupted}, "
        f"{report.memory_bits} bits"
    )


@cli.command()
@click.option("--workers", type=int, default=None)
@common_options()
@handle_errors
def grid(workers, seed, out, config_path):
    """Run a full experiment grid from --config into --out."""
    if not config_path:
        raise click.UsageError("grid needs --config")
    result = run_experiment(config_path, out, workers)
    click.echo(f"{len(result.cells)} cells, {len(result.failures)} failures -> {out}")
    if result.failures:
        for failure in result.failures:
            click.echo(f"  {failure['cell']}: {failure['error']}", err=True)
        sys.exit(1)


@cli.command()
@click.option("--deck", "deck_path", default=None, type=click.Path())
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@common_options(default_out="-")
@handle_errors
def serve(deck_path, host, port, seed, out, config_path):
    """Serve deck predictions over HTTP."""
    web.main(deck_path=deck_path, host=host, port=port)


def main():
    cli()


if __name__ == "__main__":
    main()
