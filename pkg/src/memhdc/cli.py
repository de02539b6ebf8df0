"""Command-line entry point: ``memhdc <command> ...``.

Exit status is 0 on success. Failures print ``error[<category>]: <message>``
to stderr and exit with the category's code (2 config, 3 corpus,
4 dimension/capacity/model, 5 compare, 1 anything else).
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import classifier as clf
from .corpus import load_corpus
from .device import analog_calls
from .encoder import read_hv_file, write_hv_file
from .errors import ConfigError, MemHdcError
from .harness import (
    AccuracyReport,
    ExperimentConfig,
    EncodedSplit,
    atomic_write,
    build_report,
    classify,
    encode_split,
    log_resources,
    report_compare,
    run_experiment,
    run_noise_sweep,
    train_classifier,
    write_report,
)


def _config(config, setup=None, corpus=None, seed=None, out=None, cache=None) -> ExperimentConfig:
    overrides = dict(setup=setup, corpus_root=corpus, seed=seed, output_path=out, cache_dir=cache)
    if config:
        return ExperimentConfig.from_file(config, **overrides)
    return replace(ExperimentConfig(), **{k: v for k, v in overrides.items() if v is not None})


def _sigma_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sigma-list {text!r}") from exc


config_opt = click.option("--config", type=click.Path(exists=True, dir_okay=False), help="key = value config file")
setup_opt = click.option("--setup", type=click.Choice(["sw-sw", "hw-sw", "sw-hw", "hw-hw"]))
corpus_opt = click.option("--corpus", type=click.Path(), help="directory with one text file per language")
seed_opt = click.option("--seed", type=int)
out_opt = click.option("--out", type=click.Path(), help="output directory")
cache_opt = click.option("--cache", type=click.Path(), help="directory for cached encodings")


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except MemHdcError as exc:
            click.echo(f"error[{exc.category}]: {exc}", err=True)
            sys.exit(exc.exit_code)


@click.group(cls=_Group)
@click.option("-v", "--verbose", is_flag=True, help="log progress and resource accounting")
def main(verbose: bool):
    """Memristive-SoC hyperdimensional computing experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@config_opt
@setup_opt
@corpus_opt
@seed_opt
@out_opt
@cache_opt
def experiment(config, setup, corpus, seed, out, cache):
    """Run one encode/train/classify setup and write report.json / report.csv."""
    cfg = _config(config, setup, corpus, seed, out, cache)
    report = run_experiment(cfg)
    click.echo(f"{cfg.setup}: average accuracy {report.average:.4f}")


@main.command()
@config_opt
@setup_opt
@corpus_opt
@seed_opt
@out_opt
@cache_opt
@click.option("--sigma-list", required=True, help="comma-separated read-noise sigmas in volts")
def sweep(config, setup, corpus, seed, out, cache, sigma_list):
    """Repeat one setup over several read-noise levels."""
    cfg = _config(config, setup, corpus, seed, out, cache)
    for report in run_noise_sweep(cfg, _sigma_list(sigma_list)):
        click.echo(f"sigma={report.read_sigma_v:g} V: average accuracy {report.average:.4f}")


@main.command()
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), help="write the deltas as JSON here")
def compare(report_a, report_b, out):
    """Per-language accuracy deltas (B - A) between two reports of the same split."""
    a = AccuracyReport.from_json(Path(report_a).read_text())
    b = AccuracyReport.from_json(Path(report_b).read_text())
    deltas = report_compare(a, b)
    text = json.dumps(deltas, indent=2, sort_keys=True) + "\n"
    if out:
        atomic_write(Path(out), text)
    click.echo(text, nl=False)


@main.command()
@config_opt
@setup_opt
@corpus_opt
@seed_opt
@out_opt
@cache_opt
def encode(config, setup, corpus, seed, out, cache):
    """Encode the train/test split with the setup's encoder path into train.tsv / test.tsv."""
    cfg = _config(config, setup, corpus, seed, out, cache)
    if not cfg.output_path:
        raise ConfigError("--out is required")
    data = load_corpus(cfg.corpus_root)
    enc = encode_split(cfg, data)
    out_dir = Path(cfg.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, samples, codes in (("train", enc.train, enc.train_codes), ("test", enc.test, enc.test_codes)):
        write_hv_file(out_dir / f"{name}.tsv", [s.id for s in samples], [s.label for s in samples], codes, "quantized")
    meta = {"encoder": cfg.encoder_path, "clip_T": enc.clip_T, "languages": list(data.languages)}
    atomic_write(out_dir / "encoding.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    click.echo(f"encoded {len(enc.train)} train / {len(enc.test)} test samples (clip_T={enc.clip_T})")


@main.command()
@config_opt
@seed_opt
@click.option("--hv", "hv_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(), help="weights file to write")
def train(config, seed, hv_dir, out):
    """Train the perceptron on <hv>/train.tsv."""
    cfg = _config(config, seed=seed)
    meta = json.loads((Path(hv_dir) / "encoding.json").read_text())
    _, labels, codes, _ = read_hv_file(Path(hv_dir) / "train.tsv")
    weights = train_classifier(cfg, codes, labels, len(meta["languages"]))
    atomic_write(Path(out), weights.to_text())
    click.echo(f"trained {weights.hv_dim}x{weights.n_classes} perceptron -> {out}")


@main.command(name="eval")
@config_opt
@setup_opt
@corpus_opt
@seed_opt
@out_opt
@click.option("--hv", "hv_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--weights", "weights_path", required=True, type=click.Path(exists=True, dir_okay=False))
def evaluate(config, setup, corpus, seed, out, hv_dir, weights_path):
    """Classify <hv>/test.tsv on the setup's classifier path and write a report.

    The report's split and corpus digests need the original corpus (--corpus).
    """
    cfg = _config(config, setup, corpus, seed, out)
    data = load_corpus(cfg.corpus_root)
    meta = json.loads((Path(hv_dir) / "encoding.json").read_text())
    weights = clf.PerceptronWeights.from_text(Path(weights_path).read_text())
    by_id = {s.id: s for s in data.samples}
    train_ids, _, _, _ = read_hv_file(Path(hv_dir) / "train.tsv")
    test_ids, _, test_codes, _ = read_hv_file(Path(hv_dir) / "test.tsv")
    try:
        train = [by_id[i] for i in train_ids]
        test = [by_id[i] for i in test_ids]
    except KeyError as exc:
        raise ConfigError(f"encoded sample {exc} is not in the corpus") from exc
    start = analog_calls.count
    predictions = classify(cfg, weights, test, test_codes)
    enc = EncodedSplit(train, test, np.zeros((0, weights.hv_dim)), test_codes, meta["clip_T"])
    report = build_report(cfg, data, enc, predictions, analog_calls.count - start)
    log_resources(report.resources)
    if cfg.output_path:
        write_report(report, cfg.output_path)
    click.echo(f"{cfg.classifier_path} classifier: average accuracy {report.average:.4f}")


@main.command(name="make-corpus")
@click.option("--kind", type=click.Choice(["wordfreq", "markov"]), default="wordfreq", show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=None, help="samples per language")
@click.option("--languages", type=int, default=3, show_default=True, help="number of languages (markov only)")
def make_corpus(kind, out, seed, samples, languages):
    """Write a substitute corpus in the loader's layout."""
    from .synth import make_markov_corpus, make_wordfreq_corpus

    if kind == "wordfreq":
        path = make_wordfreq_corpus(out, samples_per_language=samples or 1000, seed=seed)
    else:
        path = make_markov_corpus(out, n_languages=languages, samples_per_language=samples or 100, seed=seed)
    click.echo(f"wrote {kind} corpus to {path}")


if __name__ == "__main__":
    main()
