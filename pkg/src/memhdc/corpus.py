"""Per-language text corpus: loading, filtering and stratified train/test splits.

Layout: one UTF-8 file per language in a flat directory, one sample per
line, file stem = language code (``en.txt`` -> ``en``). Languages are
indexed by sorted file name. Sample ids are ``<file name>:<line number>``
with 1-based line numbers.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .device import make_rng
from .encoder import NGRAM, normalize_text, symbols_to_text
from .errors import ConfigError, CorpusError

log = logging.getLogger(__name__)

TAG_SPLIT = 21


@dataclass(frozen=True)
class LabeledSample:
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class Corpus:
    languages: tuple[str, ...]
    samples: tuple[LabeledSample, ...]

    @property
    def n_classes(self) -> int:
        return len(self.languages)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update("\x1f".join(self.languages).encode())
        for s in self.samples:
            h.update(f"\x1e{s.id}\x1f{s.label}\x1f{s.text}".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def _language_files(root: Path) -> list[Path]:
    return sorted(p for p in root.iterdir() if p.is_file() and not p.name.startswith("."))


def load_corpus(root) -> Corpus:
    """Read every language file under ``root``; samples too short for a trigram are dropped with a warning."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    files = _language_files(root)
    if not files:
        raise CorpusError(f"corpus directory is empty: {root}")
    languages, samples = [], []
    for label, path in enumerate(files):
        data = path.read_bytes()
        lines = data.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        if not lines:
            raise CorpusError(f"{path}: language file is empty")
        kept = 0
        for lineno, raw in enumerate(lines, start=1):
            try:
                text = raw.decode("utf-8").rstrip("\r")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: undecodable bytes ({exc.reason})") from exc
            sid = f"{path.name}:{lineno}"
            if len(normalize_text(text)) < NGRAM:
                log.warning("skipping %s: fewer than %d symbols after normalization", sid, NGRAM)
                continue
            samples.append(LabeledSample(sid, text, label))
            kept += 1
        if kept == 0:
            raise CorpusError(f"{path}: no usable samples")
        languages.append(path.stem)
    return Corpus(tuple(languages), tuple(samples))


def split(samples, spec: SplitSpec = SplitSpec()) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Seeded shuffle then a floor(n * fraction) cut, per class when stratified.

    Class ``c`` shuffles with its own stream ``(seed, TAG_SPLIT, c)``, so its
    split does not depend on other classes.
    """
    samples = list(samples)
    if not spec.stratified:
        order = make_rng(spec.seed, TAG_SPLIT).permutation(len(samples))
        cut = int(np.floor(len(samples) * spec.train_fraction))
        return [samples[i] for i in order[:cut]], [samples[i] for i in order[cut:]]
    by_class: dict[int, list[LabeledSample]] = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s)
    train, test = [], []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < 2:
            raise CorpusError(f"class {label} has {len(members)} sample(s); a stratified split needs 2")
        order = make_rng(spec.seed, TAG_SPLIT, label).permutation(len(members))
        cut = int(np.floor(len(members) * spec.train_fraction))
        train += [members[i] for i in order[:cut]]
        test += [members[i] for i in order[cut:]]
    return train, test


def split_digest(train, test) -> str:
    h = hashlib.sha256()
    h.update("\n".join(s.id for s in train).encode())
    h.update(b"\x00")
    h.update("\n".join(s.id for s in test).encode())
    return h.hexdigest()


def write_normalized(corpus: Corpus, out_dir) -> None:
    """Cache the corpus with every line already normalized, in the same layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, lang in enumerate(corpus.languages):
        lines = [symbols_to_text(normalize_text(s.text)) for s in corpus.samples if s.label == label]
        (out / f"{lang}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
