"""Trigram hypervector encoding on the crossbar fabric.

Pipeline per text sample: normalize to the 27-symbol alphabet, slide a
width-3 window to get 81-D one-hot trigram vectors, project each through the
random-conductance encoder tiles (81 x 512 over four 81 x 128 cores), take the
sign of every output from one bit of its ADC code, sum the +-1 vectors over
the sample, and finally map the integer sums onto DAC codes for the
classifier.

The software reference path uses the same conductance matrix but takes the
sign of the exact, centered projection instead of an ADC bit. It never
touches the analog model.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import (
    G_MAX,
    G_MIN,
    ConductanceMatrix,
    ConverterSpec,
    NoiseSpec,
    calibrate_tia_gain,
    randomize_conductance,
)
from .errors import ConfigError, DimensionError
from .fabric import SocConfig, TilePlan, assemble, plan_tiling, soc_vmm

ALPHABET = "abcdefghijklmnopqrstuvwxyz "
N_SYMBOLS = 27
SPACE = 26
NGRAM = 3
TRIGRAM_DIM = NGRAM * N_SYMBOLS
N_TRIGRAMS = N_SYMBOLS**NGRAM

HV_FILE_VERSION = "memhdc-hv/1"

_NON_LETTERS = re.compile(r"[^a-z]+")


@dataclass(frozen=True)
class EncoderConfig:
    hv_dim: int = 512
    sign_bit_position: int = 2
    clip_T: int | None = None  # fitted on the training set when None
    col_block: int = 128

    def __post_init__(self) -> None:
        if self.hv_dim < 1 or self.col_block < 1:
            raise ConfigError("hv_dim and col_block must be positive")
        if self.sign_bit_position < 0:
            raise ConfigError("sign_bit_position must be non-negative")
        if self.clip_T is not None and self.clip_T <= 0:
            raise ConfigError("clip_T must be a positive integer")


def normalize_text(raw: str) -> np.ndarray:
    """Symbol indices: a-z -> 0..25, runs of anything else -> one space (26), ends stripped."""
    text = _NON_LETTERS.sub(" ", raw.lower()).strip()
    idx = np.frombuffer(text.encode("ascii"), dtype=np.uint8).astype(np.int64) - ord("a")
    idx[idx < 0] = SPACE
    return idx


def symbols_to_text(symbols) -> str:
    return "".join(ALPHABET[s] for s in symbols)


def trigram_rows(symbols) -> np.ndarray:
    """Active row index of each window position, shape (n_trigrams, 3)."""
    s = np.asarray(symbols, dtype=np.int64)
    n = max(0, len(s) - NGRAM + 1)
    if n == 0:
        return np.zeros((0, NGRAM), dtype=np.int64)
    windows = np.stack([s[k:k + n] for k in range(NGRAM)], axis=1)
    return windows + N_SYMBOLS * np.arange(NGRAM)


def trigram_features(symbols) -> np.ndarray:
    """Binary 81-D trigram vectors (position-major concatenation of three one-hots)."""
    rows = trigram_rows(symbols)
    tv = np.zeros((len(rows), TRIGRAM_DIM), dtype=np.uint8)
    np.put_along_axis(tv, rows, 1, axis=1)
    return tv


def trigram_ids(symbols) -> np.ndarray:
    """Base-27 trigram id ``27^2 a + 27 b + c`` of every window."""
    rows = trigram_rows(symbols) - N_SYMBOLS * np.arange(NGRAM)
    return rows @ np.array([N_SYMBOLS**2, N_SYMBOLS, 1])


def all_trigram_features() -> np.ndarray:
    """Every valid trigram vector, indexed by trigram id."""
    ids = np.arange(N_TRIGRAMS)
    digits = np.stack([ids // N_SYMBOLS**2, (ids // N_SYMBOLS) % N_SYMBOLS, ids % N_SYMBOLS], axis=1)
    tv = np.zeros((N_TRIGRAMS, TRIGRAM_DIM), dtype=np.uint8)
    np.put_along_axis(tv, digits + N_SYMBOLS * np.arange(NGRAM), 1, axis=1)
    return tv


@dataclass(frozen=True)
class EncoderState:
    """Random-conductance encoder tiles and the converter spec calibrated for them."""

    plan: TilePlan
    tiles: tuple[ConductanceMatrix, ...]
    spec: ConverterSpec
    noise: NoiseSpec
    config: EncoderConfig = field(default_factory=EncoderConfig)

    @property
    def matrix(self) -> np.ndarray:
        return assemble(self.plan, self.tiles)

    def input_codes(self, tv) -> np.ndarray:
        hi = self.spec.voltage_to_dac_code(self.spec.v_high)
        lo = self.spec.voltage_to_dac_code(self.spec.v_low)
        return np.where(np.asarray(tv) > 0, hi, lo)


def peak_trigram_current(g: np.ndarray, spec: ConverterSpec) -> float:
    """Largest column current any valid trigram input can draw from ``g`` (81 x n)."""
    blocks = g.reshape(NGRAM, N_SYMBOLS, -1)
    per_col = spec.v_low * g.sum(axis=0) + (spec.v_high - spec.v_low) * blocks.max(axis=1).sum(axis=0)
    return float(per_col.max())


def build_encoder(seed: int, config: EncoderConfig = EncoderConfig(), spec: ConverterSpec = ConverterSpec(),
                  noise: NoiseSpec = NoiseSpec(), bounds=(G_MIN, G_MAX), distribution=None,
                  soc: SocConfig = SocConfig(), first_core: int = 0) -> EncoderState:
    """Draw the random encoder tiles and calibrate the TIA against the trigram worst case."""
    plan = plan_tiling(TRIGRAM_DIM, config.hv_dim, soc, col_block=config.col_block, first_core=first_core)
    tiles = tuple(randomize_conductance(t.row_span, t.col_span, distribution, seed, bounds, key=(k,))
                  for k, t in enumerate(plan.tiles))
    peak = peak_trigram_current(assemble(plan, tiles), spec)
    if config.sign_bit_position >= spec.adc_bits:
        raise ConfigError(f"sign bit {config.sign_bit_position} outside a {spec.adc_bits}-bit ADC code")
    return EncoderState(plan, tiles, calibrate_tia_gain(peak, spec), noise, config)


def project_trigram(tv, state: EncoderState, key: tuple[int, ...] = ()) -> np.ndarray:
    """ADC codes of the analog projection; ``tv`` may be one vector or a batch."""
    tv = np.asarray(tv)
    if tv.shape[-1:] != (TRIGRAM_DIM,):
        raise DimensionError(f"trigram vectors must be {TRIGRAM_DIM}-D, got {tv.shape}")
    return soc_vmm(state.input_codes(tv), state.plan, state.tiles, state.noise, state.spec, key=key)


def extract_sign(codes, bit_position: int, adc_bits: int = 8) -> np.ndarray:
    """+1 where the selected ADC bit is set, -1 elsewhere."""
    if not 0 <= bit_position < adc_bits:
        raise ConfigError(f"bit position {bit_position} outside [0, {adc_bits})")
    bits = (np.asarray(codes, dtype=np.int64) >> bit_position) & 1
    return (2 * bits - 1).astype(np.int64)


def _check_length(symbols) -> None:
    if len(symbols) < NGRAM:
        raise DimensionError(f"sample has {len(symbols)} symbols, at least {NGRAM} needed for a trigram")


def encode_sample(symbols, state: EncoderState, key: tuple[int, ...] = ()) -> np.ndarray:
    """Accumulated hypervector of one sample through the simulated hardware."""
    _check_length(symbols)
    codes = project_trigram(trigram_features(symbols), state, key=key)
    signs = extract_sign(codes, state.config.sign_bit_position, state.spec.adc_bits)
    return signs.sum(axis=0)


class SoftwareEncoder:
    """Noise-free reference: sign of the exact projection centered on its trigram mean.

    The per-column center is the mean output over the uniform distribution of
    all 27^3 valid trigrams. A centered value of exactly zero maps to +1.
    Signs for every trigram are tabulated once; encoding a sample is then a
    table lookup and sum.
    """

    def __init__(self, matrix: np.ndarray, spec: ConverterSpec):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.spec = spec
        volts = np.where(all_trigram_features() > 0, spec.v_high, spec.v_low)
        projection = volts @ self.matrix
        self.center = projection.mean(axis=0)
        # differences within float round-off of the center count as exact ties
        tol = 1e-12 * np.abs(self.center)
        self.table = np.where(projection - self.center >= -tol, 1, -1).astype(np.int8)

    @classmethod
    def from_state(cls, state: EncoderState) -> SoftwareEncoder:
        return cls(state.matrix, state.spec)

    @property
    def hv_dim(self) -> int:
        return self.matrix.shape[1]

    def sign_hvs(self, symbols) -> np.ndarray:
        return self.table[trigram_ids(symbols)].astype(np.int64)

    def encode_sample(self, symbols) -> np.ndarray:
        _check_length(symbols)
        return self.sign_hvs(symbols).sum(axis=0)


def fit_clip_T(accumulated) -> int:
    """Clipping level: twice the pooled standard deviation of training entries, rounded up."""
    std = float(np.std(np.asarray(accumulated, dtype=np.float64)))
    return max(1, math.ceil(2 * std))


def quantize_hv(hv, clip_T: int, spec: ConverterSpec) -> np.ndarray:
    """Clamp to [-clip_T, clip_T] and map affinely onto DAC codes (zero lands on the upper mid-code)."""
    if clip_T <= 0:
        raise ConfigError("clip_T must be positive")
    x = np.clip(np.asarray(hv, dtype=np.float64), -clip_T, clip_T)
    return np.floor((x + clip_T) / (2 * clip_T) * spec.dac_max_code + 0.5).astype(np.int64)


def write_hv_file(path, ids, labels, hvs, stage: str) -> None:
    """Columnar text: a version line, a header row, then ``sample_id label v0 ... v{d-1}`` per sample."""
    hvs = np.asarray(hvs, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#{HV_FILE_VERSION} stage={stage} dim={hvs.shape[1]}\n")
        fh.write("\t".join(["sample_id", "label"] + [f"hv{j}" for j in range(hvs.shape[1])]) + "\n")
        for sid, label, hv in zip(ids, labels, hvs):
            fh.write(f"{sid}\t{int(label)}\t" + "\t".join(map(str, hv.tolist())) + "\n")


def read_hv_file(path) -> tuple[list[str], np.ndarray, np.ndarray, str]:
    """Inverse of :func:`write_hv_file`; returns ``(ids, labels, hvs, stage)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(f"#{HV_FILE_VERSION}"):
        raise ConfigError(f"{path}: not a {HV_FILE_VERSION} file")
    meta = dict(item.split("=", 1) for item in lines[0].split()[1:])
    ids, labels, rows = [], [], []
    for line in lines[2:]:
        parts = line.split("\t")
        ids.append(parts[0])
        labels.append(int(parts[1]))
        rows.append([int(x) for x in parts[2:]])
    hvs = np.array(rows, dtype=np.int64).reshape(len(rows), int(meta["dim"]))
    return ids, np.array(labels, dtype=np.int64), hvs, meta["stage"]
