"""Single-layer perceptron (hv_dim -> n_classes) trained offline and deployed on crossbars.

Training minimises softmax cross-entropy with minibatch SGD on the same
input scaling the hardware sees: DAC codes are converted to volts in
``[0, dac_fullscale]`` before the dot product.

Deployment maps each signed weight onto a differential column pair,
``g+ = g_min + alpha * max(w, 0)`` and ``g- = g_min + alpha * max(-w, 0)``,
with one global ``alpha``. Column ``2c`` holds class ``c``'s positive part
and column ``2c + 1`` its negative part. The class score is the accumulated
code of the positive column minus that of the negative column, which equals
``tia_gain * alpha * w.T @ v`` before quantization and noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .device import (
    G_MAX,
    G_MIN,
    ConductanceMatrix,
    ConverterSpec,
    NoiseSpec,
    calibrate_tia_gain,
    make_rng,
)
from .errors import ConfigError, DegenerateModelError, DimensionError
from .fabric import SocConfig, TilePlan, plan_tiling, program_plan, soc_vmm

WEIGHTS_VERSION = "memhdc-perceptron/1"
TAG_INIT = 11
TAG_SHUFFLE = 12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    epochs: int = 60
    batch_size: int = 32
    momentum: float = 0.9
    seed: int = 0
    init_scale: float = 0.01
    bias: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")


@dataclass
class PerceptronWeights:
    w: np.ndarray
    bias: np.ndarray | None = None

    @property
    def hv_dim(self) -> int:
        return self.w.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w.shape[1]

    def augmented(self) -> np.ndarray:
        """Weights with the bias as one extra input row (driven at full scale)."""
        return self.w if self.bias is None else np.vstack([self.w, self.bias])

    def to_text(self) -> str:
        has_bias = self.bias is not None
        lines = [f"#{WEIGHTS_VERSION} rows={self.hv_dim} cols={self.n_classes} bias={int(has_bias)}"]
        lines += [" ".join(repr(float(x)) for x in row) for row in self.augmented()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> PerceptronWeights:
        lines = text.splitlines()
        if not lines or not lines[0].startswith(f"#{WEIGHTS_VERSION}"):
            raise ConfigError(f"not a {WEIGHTS_VERSION} weights file")
        meta = {k: int(v) for k, v in (item.split("=") for item in lines[0].split()[1:])}
        mat = np.array([[float(x) for x in line.split()] for line in lines[1:] if line.strip()])
        expected = (meta["rows"] + meta["bias"], meta["cols"])
        if mat.shape != expected:
            raise DimensionError(f"weights body has shape {mat.shape}, header says {expected}")
        if meta["bias"]:
            return cls(mat[:-1].copy(), mat[-1].copy())
        return cls(mat)


def codes_to_volts(codes, spec: ConverterSpec) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) / spec.dac_max_code * spec.dac_fullscale


def _augment(x: np.ndarray, with_bias: bool, spec: ConverterSpec) -> np.ndarray:
    if not with_bias:
        return x
    return np.concatenate([x, np.full(x.shape[:-1] + (1,), spec.dac_fullscale)], axis=-1)


def softmax_xent(w: np.ndarray, x: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of ``softmax(x @ w)`` and its gradient with respect to ``w``."""
    logits = x @ w
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    n = len(labels)
    loss = -np.mean(np.log(p[np.arange(n), labels]))
    p[np.arange(n), labels] -= 1.0
    return float(loss), x.T @ p / n


def init_weights(hv_dim: int, n_classes: int, cfg: TrainConfig) -> np.ndarray:
    rows = hv_dim + int(cfg.bias)
    return make_rng(cfg.seed, TAG_INIT).uniform(-cfg.init_scale, cfg.init_scale, size=(rows, n_classes))


def train_sgd(train_codes, labels, n_classes: int, cfg: TrainConfig = TrainConfig(),
              spec: ConverterSpec = ConverterSpec()) -> PerceptronWeights:
    """Minibatch SGD (with optional heavy-ball momentum) on softmax cross-entropy.

    One generator seeded from ``cfg.seed`` fixes the initial weights, and a
    second one the per-epoch shuffle order, so training is bit-reproducible.
    """
    codes = np.asarray(train_codes)
    labels = np.asarray(labels, dtype=np.int64)
    if codes.ndim != 2 or len(codes) == 0:
        raise ConfigError("training set is empty")
    if len(labels) != len(codes):
        raise DimensionError("one label per training hypervector is required")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ConfigError(f"labels must lie in [0, {n_classes})")
    x = _augment(codes_to_volts(codes, spec), cfg.bias, spec)
    w = init_weights(codes.shape[1], n_classes, cfg)
    velocity = np.zeros_like(w)
    shuffle = make_rng(cfg.seed, TAG_SHUFFLE)
    for _ in range(cfg.epochs):
        order = shuffle.permutation(len(x))
        for start in range(0, len(x), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grad = softmax_xent(w, x[batch], labels[batch])
            velocity = cfg.momentum * velocity - cfg.learning_rate * grad
            w = w + velocity
    if cfg.bias:
        return PerceptronWeights(w[:-1].copy(), w[-1].copy())
    return PerceptronWeights(w)


def scores_sw(codes, weights: PerceptronWeights, spec: ConverterSpec = ConverterSpec()) -> np.ndarray:
    x = codes_to_volts(codes, spec)
    if x.shape[-1] != weights.hv_dim:
        raise DimensionError(f"hypervector has {x.shape[-1]} entries, weights expect {weights.hv_dim}")
    return _augment(x, weights.bias is not None, spec) @ weights.augmented()


def infer_sw(codes, weights: PerceptronWeights, spec: ConverterSpec = ConverterSpec()):
    """Predicted class (lowest index wins ties) for one hypervector or a batch."""
    return np.argmax(scores_sw(codes, weights, spec), axis=-1)


@dataclass(frozen=True)
class WeightMapping:
    alpha: float
    plan: TilePlan
    tiles: tuple[ConductanceMatrix, ...]
    spec: ConverterSpec
    n_classes: int
    has_bias: bool = False
    scheme: str = "differential-pair"
    bounds: tuple[float, float] = field(default=(G_MIN, G_MAX))

    def to_json(self) -> str:
        return json.dumps({
            "version": WEIGHTS_VERSION, "scheme": self.scheme, "alpha": self.alpha,
            "n_classes": self.n_classes, "has_bias": self.has_bias,
            "bounds": list(self.bounds), "tia_gain": self.spec.tia_gain,
            "plan": self.plan.to_text(),
        }, indent=2, sort_keys=True)


def differential_conductance(weights: PerceptronWeights, bounds=(G_MIN, G_MAX)) -> tuple[np.ndarray, float]:
    """Target conductances ``(rows, 2 * n_classes)`` with interleaved +/- columns, and alpha."""
    g_min, g_max = bounds
    w = weights.augmented()
    if not np.all(np.isfinite(w)):
        raise DegenerateModelError("weights contain non-finite entries")
    w_max = float(np.abs(w).max())
    if w_max == 0:
        raise DegenerateModelError("all-zero weight matrix: conductance scale is undefined")
    alpha = (g_max - g_min) / w_max
    g = np.empty((w.shape[0], 2 * w.shape[1]))
    g[:, 0::2] = g_min + alpha * np.maximum(w, 0)
    g[:, 1::2] = g_min + alpha * np.maximum(-w, 0)
    # alpha * max|w| can land one ulp past g_max
    return np.clip(g, g_min, g_max), alpha


def map_weights_to_conductance(weights: PerceptronWeights, bounds=(G_MIN, G_MAX),
                               noise: NoiseSpec = NoiseSpec(), spec: ConverterSpec = ConverterSpec(),
                               soc: SocConfig = SocConfig(), first_core: int = 0) -> WeightMapping:
    """Plan, program (with write noise) and calibrate the classifier tiles.

    The TIA gain is shared by every tile of the plan, so partial sums from
    different row blocks stay on one scale; it is set so the worst tile's
    largest column current at all-full-scale inputs reaches 80% of the ADC.
    """
    target, alpha = differential_conductance(weights, bounds)
    plan = plan_tiling(target.shape[0], target.shape[1], soc, first_core=first_core)
    tiles = tuple(program_plan(target, plan, noise, bounds))
    peak = max(spec.dac_fullscale * float(t.g.sum(axis=0).max()) for t in tiles)
    return WeightMapping(alpha, plan, tiles, calibrate_tia_gain(peak, spec),
                         weights.n_classes, weights.bias is not None, bounds=tuple(bounds))


def scores_hw(codes, mapping: WeightMapping, noise: NoiseSpec, quantize: bool = True,
              key: tuple[int, ...] = ()) -> np.ndarray:
    codes = np.asarray(codes)
    expected = mapping.plan.logical_rows - int(mapping.has_bias)
    if codes.shape[-1] != expected:
        raise DimensionError(f"hypervector has {codes.shape[-1]} entries, mapping expects {expected}")
    if mapping.has_bias:
        codes = np.concatenate([codes, np.full(codes.shape[:-1] + (1,), mapping.spec.dac_max_code)], axis=-1)
    acc = soc_vmm(codes, mapping.plan, mapping.tiles, noise, mapping.spec, quantize=quantize, key=key)
    return acc[..., 0::2] - acc[..., 1::2]


def infer_hw(codes, mapping: WeightMapping, noise: NoiseSpec, quantize: bool = True,
             key: tuple[int, ...] = ()):
    """Predicted class from the crossbar: argmax over differential column scores, lowest index on ties."""
    return np.argmax(scores_hw(codes, mapping, noise, quantize=quantize, key=key), axis=-1)
