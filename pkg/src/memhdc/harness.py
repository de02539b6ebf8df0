"""Experiment driver for the four encoder/classifier setups.

A setup tag ``<enc>-<cls>`` picks the software (``sw``) or simulated
hardware (``hw``) path for encoding and for classification. A run loads
the corpus, splits it, encodes both halves, fits the clipping level on the
training encodings, trains the perceptron on the training set, classifies
the test set and reports per-language accuracy.

All randomness derives from ``ExperimentConfig.seed``: the encoder
conductances, the split, weight init and shuffling, write noise and read
noise. Read noise for a sample is keyed by a hash of its id, so results do
not depend on processing order or on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classifier as clf
from .config import DEVICE_KEYS, device_specs, read_kv, typed
from .corpus import Corpus, LabeledSample, SplitSpec, load_corpus, split, split_digest
from .device import G_MAX, G_MIN, ConverterSpec, NoiseSpec, analog_calls
from .encoder import (
    TRIGRAM_DIM,
    EncoderConfig,
    EncoderState,
    SoftwareEncoder,
    build_encoder,
    encode_sample,
    fit_clip_T,
    normalize_text,
    quantize_hv,
)
from .errors import ComparisonError, ConfigError
from .fabric import SocConfig, TilePlan, plan_tiling

log = logging.getLogger(__name__)

SETUPS = ("sw-sw", "hw-sw", "sw-hw", "hw-hw")
REPORT_VERSION = "memhdc-report/1"
CONVENTIONAL_HV_DIM = 10_000

TAG_ENCODE = 41
TAG_INFER = 42

KEYS = {
    **DEVICE_KEYS,
    "setup": str, "corpus": str, "out": str, "cache_dir": str, "workers": int,
    "hv_dim": int, "sign_bit_position": int, "clip_T": int, "col_block": int,
    "learning_rate": float, "epochs": int, "batch_size": int, "momentum": float, "bias": bool,
    "train_fraction": float, "stratified": bool, "n_cores": int,
}


def sample_key(sample_id: str) -> int:
    """Stable 63-bit integer derived from a sample id; keys that sample's noise streams."""
    return int.from_bytes(hashlib.blake2b(sample_id.encode(), digest_size=8).digest(), "big") >> 1


@dataclass(frozen=True)
class ExperimentConfig:
    setup: str = "sw-sw"
    corpus_root: str = ""
    converter: ConverterSpec = field(default_factory=ConverterSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    bounds: tuple[float, float] = (G_MIN, G_MAX)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: clf.TrainConfig = field(default_factory=clf.TrainConfig)
    train_fraction: float = 0.7
    stratified: bool = True
    soc: SocConfig = field(default_factory=SocConfig)
    seed: int = 0
    output_path: str | None = None
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.setup not in SETUPS:
            raise ConfigError(f"unknown setup {self.setup!r}; expected one of {', '.join(SETUPS)}")

    @property
    def encoder_path(self) -> str:
        return self.setup.split("-")[0]

    @property
    def classifier_path(self) -> str:
        return self.setup.split("-")[1]

    @property
    def noise_spec(self) -> NoiseSpec:
        return replace(self.noise, seed=self.seed)

    @property
    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.seed, self.stratified)

    def experiment_dict(self) -> dict:
        """Everything that can change results; paths and worker count are excluded."""
        d = asdict(self)
        for key in ("corpus_root", "output_path", "cache_dir", "workers"):
            d.pop(key)
        d["noise"].pop("seed")
        d["train"].pop("seed")
        d["bounds"] = list(self.bounds)
        return d

    @classmethod
    def from_values(cls, values: dict) -> ExperimentConfig:
        converter, noise, bounds = device_specs(values)
        enc = {k: values[k] for k in ("hv_dim", "sign_bit_position", "clip_T", "col_block") if k in values}
        train = {k: values[k] for k in ("learning_rate", "epochs", "batch_size", "momentum", "bias") if k in values}
        kwargs = dict(converter=converter, noise=noise, bounds=bounds,
                      encoder=EncoderConfig(**enc), train=clf.TrainConfig(**train))
        if "n_cores" in values:
            kwargs["soc"] = SocConfig(n_cores=values["n_cores"])
        for key, attr in (("setup", "setup"), ("corpus", "corpus_root"), ("out", "output_path"),
                          ("cache_dir", "cache_dir"), ("workers", "workers"), ("seed", "seed"),
                          ("train_fraction", "train_fraction"), ("stratified", "stratified")):
            if key in values:
                kwargs[attr] = values[key]
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> ExperimentConfig:
        values = typed(read_kv(path), KEYS)
        return replace(cls.from_values(values), **{k: v for k, v in overrides.items() if v is not None})


def config_digest(cfg: ExperimentConfig, corpus_digest: str) -> str:
    payload = json.dumps({"config": cfg.experiment_dict(), "corpus": corpus_digest}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class AccuracyReport:
    setup: str
    seed: int
    languages: list[str]
    per_language: list[float]
    n_test: list[int]
    config_digest: str
    split_digest: str
    corpus_digest: str
    clip_T: int
    read_sigma_v: float
    analog_calls: int
    resources: dict

    @property
    def average(self) -> float:
        return float(np.mean(self.per_language))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["average"] = self.average
        d["format"] = REPORT_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["language", "accuracy", "n_test"])
        for lang, acc, n in zip(self.languages, self.per_language, self.n_test):
            writer.writerow([lang, repr(acc), n])
        writer.writerow(["average", repr(self.average), sum(self.n_test)])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> AccuracyReport:
        d = json.loads(text)
        if d.get("format") != REPORT_VERSION:
            raise ConfigError(f"not a {REPORT_VERSION} report")
        d.pop("format")
        d.pop("average")
        return cls(**d)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_report(report: AccuracyReport, out_dir, stem: str = "report") -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` via write-temp-then-rename."""
    out = Path(out_dir)
    texts = {out / f"{stem}.json": report.to_json(), out / f"{stem}.csv": report.to_csv()}
    for path, text in texts.items():
        atomic_write(path, text)
    return tuple(texts)


def resource_accounting(cfg: ExperimentConfig, n_classes: int) -> dict:
    """Core usage of the encoder and classifier plans and the saving against 10,000-D hypervectors."""
    enc_plan = plan_tiling(TRIGRAM_DIM, cfg.encoder.hv_dim, cfg.soc, col_block=cfg.encoder.col_block)
    rows = cfg.encoder.hv_dim + int(cfg.train.bias)
    cls_plan = plan_tiling(rows, 2 * n_classes, cfg.soc, first_core=len(enc_plan.tiles))

    def summary(plan: TilePlan) -> dict:
        return {"cores": plan.cores, "n_cores": len(plan.tiles),
                "tiles": [[t.row_span, t.col_span] for t in plan.tiles],
                "logical_shape": [plan.logical_rows, plan.logical_cols]}

    total = len(enc_plan.tiles) + len(cls_plan.tiles)
    return {
        "encoder": summary(enc_plan),
        "classifier": summary(cls_plan),
        "total_cores": total,
        "soc_cores": cfg.soc.n_cores,
        "fits": total <= cfg.soc.n_cores,
        "hv_dim": cfg.encoder.hv_dim,
        "baseline_hv_dim": CONVENTIONAL_HV_DIM,
        "dimension_saving": 1 - cfg.encoder.hv_dim / CONVENTIONAL_HV_DIM,
    }


class Encoders:
    """Builds the encoder for a config and encodes samples on either path, with an optional disk cache."""

    def __init__(self, cfg: ExperimentConfig, corpus_digest: str):
        self.cfg = cfg
        self.corpus_digest = corpus_digest
        self.state: EncoderState = build_encoder(cfg.seed, cfg.encoder, cfg.converter, cfg.noise_spec,
                                                 cfg.bounds, soc=cfg.soc)
        self._software: SoftwareEncoder | None = None

    @property
    def software(self) -> SoftwareEncoder:
        if self._software is None:
            self._software = SoftwareEncoder.from_state(self.state)
        return self._software

    def cache_key(self, path: str) -> str:
        cfg = self.cfg
        parts = {"path": path, "corpus": self.corpus_digest, "seed": cfg.seed,
                 "encoder": asdict(replace(cfg.encoder, clip_T=None)),
                 "converter": asdict(cfg.converter), "bounds": list(cfg.bounds), "soc": asdict(cfg.soc)}
        if path == "hw":
            parts["read_sigma_v"] = cfg.noise.read_sigma_v
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:32]

    def _encode_one(self, path: str, sample: LabeledSample) -> np.ndarray:
        symbols = normalize_text(sample.text)
        if path == "sw":
            return self.software.encode_sample(symbols)
        return encode_sample(symbols, self.state, key=(TAG_ENCODE, sample_key(sample.id)))

    def encode(self, samples, path: str) -> np.ndarray:
        """Accumulated hypervectors, one row per sample, in input order."""
        samples = list(samples)
        cached = self._load_cache(path)
        if cached is not None and all(s.id in cached for s in samples):
            return np.array([cached[s.id] for s in samples])
        if self.cfg.workers > 1 and path == "hw":
            with ThreadPoolExecutor(self.cfg.workers) as pool:
                rows = list(pool.map(lambda s: self._encode_one(path, s), samples))
        else:
            rows = [self._encode_one(path, s) for s in samples]
        out = np.array(rows, dtype=np.int64).reshape(len(samples), self.cfg.encoder.hv_dim)
        self._store_cache(path, samples, out, cached)
        return out

    def _cache_file(self, path: str) -> Path | None:
        if not self.cfg.cache_dir:
            return None
        return Path(self.cfg.cache_dir) / f"enc-{path}-{self.cache_key(path)}.npz"

    def _load_cache(self, path: str) -> dict | None:
        f = self._cache_file(path)
        if f is None or not f.exists():
            return None
        with np.load(f) as data:
            return dict(zip(data["ids"].tolist(), data["hvs"]))

    def _store_cache(self, path: str, samples, hvs: np.ndarray, existing: dict | None) -> None:
        f = self._cache_file(path)
        if f is None:
            return
        merged = dict(existing or {})
        merged.update(zip((s.id for s in samples), hvs))
        ids = sorted(merged)
        f.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=f.parent, suffix=".npz")
        os.close(fd)
        np.savez(tmp, ids=np.array(ids), hvs=np.array([merged[i] for i in ids]))
        os.replace(tmp, f)


@dataclass
class EncodedSplit:
    train: list[LabeledSample]
    test: list[LabeledSample]
    train_codes: np.ndarray
    test_codes: np.ndarray
    clip_T: int

    @property
    def train_labels(self) -> np.ndarray:
        return np.array([s.label for s in self.train], dtype=np.int64)

    @property
    def test_labels(self) -> np.ndarray:
        return np.array([s.label for s in self.test], dtype=np.int64)


def encode_split(cfg: ExperimentConfig, corpus: Corpus, encoders: Encoders | None = None) -> EncodedSplit:
    train, test = split(corpus.samples, cfg.split_spec)
    encoders = encoders or Encoders(cfg, corpus.digest())
    acc_train = encoders.encode(train, cfg.encoder_path)
    acc_test = encoders.encode(test, cfg.encoder_path)
    clip_T = cfg.encoder.clip_T or fit_clip_T(acc_train)
    return EncodedSplit(train, test, quantize_hv(acc_train, clip_T, cfg.converter),
                        quantize_hv(acc_test, clip_T, cfg.converter), clip_T)


def train_classifier(cfg: ExperimentConfig, codes, labels, n_classes: int) -> clf.PerceptronWeights:
    return clf.train_sgd(codes, labels, n_classes, replace(cfg.train, seed=cfg.seed), cfg.converter)


def classify(cfg: ExperimentConfig, weights: clf.PerceptronWeights, samples, codes) -> np.ndarray:
    """Predicted labels for ``codes`` on the configured classifier path."""
    if cfg.classifier_path == "sw":
        return clf.infer_sw(codes, weights, cfg.converter)
    enc_cores = len(plan_tiling(TRIGRAM_DIM, cfg.encoder.hv_dim, cfg.soc, col_block=cfg.encoder.col_block).tiles)
    mapping = clf.map_weights_to_conductance(weights, cfg.bounds, cfg.noise_spec, cfg.converter,
                                             cfg.soc, first_core=enc_cores)

    def one(item):
        sample, hv = item
        return clf.infer_hw(hv, mapping, cfg.noise_spec, key=(TAG_INFER, sample_key(sample.id)))

    items = list(zip(samples, codes))
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return np.array(list(pool.map(one, items)), dtype=np.int64)
    return np.array([one(it) for it in items], dtype=np.int64)


def build_report(cfg: ExperimentConfig, corpus: Corpus, enc: EncodedSplit, predictions, calls: int) -> AccuracyReport:
    labels = enc.test_labels
    per_lang, counts = [], []
    for c in range(corpus.n_classes):
        mask = labels == c
        counts.append(int(mask.sum()))
        per_lang.append(float(np.mean(predictions[mask] == c)) if mask.any() else 0.0)
    digest = corpus.digest()
    return AccuracyReport(
        setup=cfg.setup, seed=cfg.seed, languages=list(corpus.languages), per_language=per_lang,
        n_test=counts, config_digest=config_digest(cfg, digest),
        split_digest=split_digest(enc.train, enc.test), corpus_digest=digest, clip_T=int(enc.clip_T),
        read_sigma_v=cfg.noise.read_sigma_v, analog_calls=calls,
        resources=resource_accounting(cfg, corpus.n_classes))


def log_resources(resources: dict) -> None:
    enc, cls = resources["encoder"], resources["classifier"]
    log.info("encoder tiles: %d cores %s, tiles %s", enc["n_cores"], enc["cores"], enc["tiles"])
    log.info("classifier tiles: %d cores %s, row spans %s x %d columns", cls["n_cores"], cls["cores"],
             [t[0] for t in cls["tiles"]], cls["logical_shape"][1])
    log.info("cores used %d of %d; hypervector dimension saving vs %d-D: %.2f%%",
             resources["total_cores"], resources["soc_cores"], resources["baseline_hv_dim"],
             100 * resources["dimension_saving"])


def run_experiment(cfg: ExperimentConfig, corpus: Corpus | None = None,
                   encoders: Encoders | None = None) -> AccuracyReport:
    """load -> split -> encode -> train -> classify -> report; writes the report if ``output_path`` is set."""
    corpus = corpus or load_corpus(cfg.corpus_root)
    start_calls = analog_calls.count
    enc = encode_split(cfg, corpus, encoders)
    weights = train_classifier(cfg, enc.train_codes, enc.train_labels, corpus.n_classes)
    predictions = classify(cfg, weights, enc.test, enc.test_codes)
    report = build_report(cfg, corpus, enc, predictions, analog_calls.count - start_calls)
    log.info("%s: average accuracy %.4f over %d test samples", cfg.setup, report.average, len(enc.test))
    log_resources(report.resources)
    if cfg.output_path:
        write_report(report, cfg.output_path)
    return report


def run_noise_sweep(base_cfg: ExperimentConfig, sigma_list, corpus: Corpus | None = None) -> list[AccuracyReport]:
    """One report per read-noise level; seed and split are shared across the sweep."""
    corpus = corpus or load_corpus(base_cfg.corpus_root)
    reports = []
    for sigma in sigma_list:
        cfg = replace(base_cfg, noise=replace(base_cfg.noise, read_sigma_v=float(sigma)), output_path=None)
        reports.append(run_experiment(cfg, corpus))
    if base_cfg.output_path:
        for i, report in enumerate(reports):
            write_report(report, base_cfg.output_path, stem=f"sweep_{i:03d}")
    return reports


def report_compare(a: AccuracyReport, b: AccuracyReport) -> dict:
    """Per-language and average accuracy deltas ``b - a``; both reports must share one split."""
    if a.split_digest != b.split_digest or a.corpus_digest != b.corpus_digest:
        raise ComparisonError("reports come from different corpora or splits")
    if a.languages != b.languages:
        raise ComparisonError("reports list different languages")
    deltas = {lang: pb - pa for lang, pa, pb in zip(a.languages, a.per_language, b.per_language)}
    return {"from": a.setup, "to": b.setup, "per_language": deltas, "average": b.average - a.average}
