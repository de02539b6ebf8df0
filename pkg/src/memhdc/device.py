"""Behavioral model of one memristive crossbar computing core.

The signal chain is DAC -> crossbar (Ohm's law + Kirchhoff current sum) ->
TIA -> additive read noise -> ADC. Conductances are in siemens, voltages in
volts, currents in amperes.

Random numbers
--------------
Every stochastic operation draws from ``make_rng(seed, *key)``, a PCG64
generator seeded with ``SeedSequence([seed, *key])``. Samples are drawn with
``standard_normal`` (or the distribution's own sampler) in row-major order
over the output array, so a plain Python loop over ``(i, j)`` calling
``rng.standard_normal()`` once per cell replays the exact same values.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionError

CORE_ROWS = 248
CORE_COLS = 256

G_MIN = 1e-6
G_MAX = 100e-6

# +-2.77 mV fluctuation read as a 3-sigma envelope
READ_SIGMA_CALIBRATED = 2.77e-3 / 3
# one LSB = 2.77 mV / 3, so a +-2.77 mV swing stays within the two lowest code bits
ADC_FULLSCALE_CALIBRATED = 255 * 2.77e-3 / 3

# stream tags keep independent consumers of one seed apart
TAG_WRITE = 1
TAG_READ = 2
TAG_RANDOMIZE = 3


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, key)])))


class _CallCounter:
    """Counts analog VMM invocations; used to prove software paths stay digital."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.count = 0

    def bump(self) -> None:
        with self._lock:
            self.count += 1

    def reset(self) -> None:
        with self._lock:
            self.count = 0


analog_calls = _CallCounter()


@dataclass(frozen=True)
class ConverterSpec:
    dac_bits: int = 8
    dac_fullscale: float = 0.141
    adc_bits: int = 8
    adc_fullscale: float = ADC_FULLSCALE_CALIBRATED
    tia_gain: float = 1e3
    v_high: float = 0.141
    v_low: float = 0.0

    def __post_init__(self) -> None:
        if self.dac_bits < 1 or self.adc_bits < 1:
            raise ConfigError("converter bit widths must be positive")
        if self.dac_fullscale <= 0 or self.adc_fullscale <= 0 or self.tia_gain <= 0:
            raise ConfigError("full-scale ranges and TIA gain must be positive")
        if not self.v_high > self.v_low >= 0:
            raise ConfigError(f"need v_high > v_low >= 0, got {self.v_high}, {self.v_low}")

    @property
    def dac_max_code(self) -> int:
        return 2**self.dac_bits - 1

    @property
    def adc_max_code(self) -> int:
        return 2**self.adc_bits - 1

    @property
    def adc_lsb(self) -> float:
        return self.adc_fullscale / self.adc_max_code

    def voltage_to_dac_code(self, v: float) -> int:
        """Nearest DAC code for a target voltage (used for binary input levels)."""
        code = np.floor(v / self.dac_fullscale * self.dac_max_code + 0.5)
        return int(np.clip(code, 0, self.dac_max_code))


@dataclass(frozen=True)
class NoiseSpec:
    read_sigma_v: float = READ_SIGMA_CALIBRATED
    write_sigma_g: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.read_sigma_v < 0 or self.write_sigma_g < 0:
            raise ConfigError("noise standard deviations must be non-negative")

    @classmethod
    def off(cls, seed: int = 0) -> NoiseSpec:
        return cls(read_sigma_v=0.0, write_sigma_g=0.0, seed=seed)


@dataclass(frozen=True)
class ConductanceMatrix:
    """Conductance of every cell of one crossbar tile.

    The array is frozen (read-only) after construction, so a programmed tile
    can be shared between concurrent readers.
    """

    g: np.ndarray
    g_min: float = G_MIN
    g_max: float = G_MAX
    physical: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        g = np.array(self.g, dtype=np.float64)
        if g.ndim != 2:
            raise DimensionError(f"conductance matrix must be 2-D, got shape {g.shape}")
        _check_bounds(self.g_min, self.g_max)
        if self.physical:
            _check_tile_shape(*g.shape)
        if g.size and (g.min() < self.g_min or g.max() > self.g_max):
            raise ConfigError("conductance outside [g_min, g_max]")
        g.flags.writeable = False
        object.__setattr__(self, "g", g)

    @property
    def rows(self) -> int:
        return self.g.shape[0]

    @property
    def cols(self) -> int:
        return self.g.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape


def _check_bounds(g_min: float, g_max: float) -> None:
    if not 0 <= g_min < g_max:
        raise ConfigError(f"invalid conductance bounds [{g_min}, {g_max}]")


def _check_tile_shape(rows: int, cols: int) -> None:
    if rows > CORE_ROWS or cols > CORE_COLS:
        raise DimensionError(f"tile {rows}x{cols} exceeds the {CORE_ROWS}x{CORE_COLS} core")


@dataclass(frozen=True)
class Uniform:
    low: float = G_MIN
    high: float = G_MAX

    def sample(self, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=shape)


@dataclass(frozen=True)
class PointMass:
    value: float

    def sample(self, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
        return np.full(shape, self.value, dtype=np.float64)


def program_conductance(target, noise: NoiseSpec, bounds=(G_MIN, G_MAX), key: tuple[int, ...] = ()) -> ConductanceMatrix:
    """Write ``target`` into a tile with Gaussian write error, clipped into bounds.

    ``key`` selects the write stream (e.g. the tile index) so several tiles
    programmed from one seed get independent errors.
    """
    g_min, g_max = bounds
    _check_bounds(g_min, g_max)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 2:
        raise DimensionError(f"target must be 2-D, got shape {target.shape}")
    _check_tile_shape(*target.shape)
    g = target.copy()
    if noise.write_sigma_g > 0:
        rng = make_rng(noise.seed, TAG_WRITE, *key)
        g += noise.write_sigma_g * rng.standard_normal(target.shape)
    return ConductanceMatrix(np.clip(g, g_min, g_max), g_min, g_max)


def randomize_conductance(rows: int, cols: int, distribution=None, seed: int = 0,
                          bounds=(G_MIN, G_MAX), key: tuple[int, ...] = ()) -> ConductanceMatrix:
    """Random tile standing in for the as-SET device spread; uniform over bounds by default."""
    _check_tile_shape(rows, cols)
    _check_bounds(*bounds)
    if distribution is None:
        distribution = Uniform(*bounds)
    rng = make_rng(seed, TAG_RANDOMIZE, *key)
    g = distribution.sample(rng, (rows, cols))
    return ConductanceMatrix(np.clip(g, *bounds), *bounds)


def dac_encode(codes, spec: ConverterSpec) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.size and (not np.issubdtype(codes.dtype, np.integer) and np.any(codes != np.round(codes))):
        raise ConfigError("DAC codes must be integers")
    if codes.size and (codes.min() < 0 or codes.max() > spec.dac_max_code):
        raise ConfigError(f"DAC code outside [0, {spec.dac_max_code}]")
    return codes.astype(np.float64) / spec.dac_max_code * spec.dac_fullscale


def analog_vmm(voltages, cond: ConductanceMatrix, noise: NoiseSpec, spec: ConverterSpec,
               key: tuple[int, ...] = ()) -> np.ndarray:
    """Post-TIA column voltages ``tia_gain * V @ G`` plus Gaussian read noise.

    ``voltages`` may carry leading batch dimensions; noise is drawn row-major
    over the full output from the stream ``(noise.seed, TAG_READ, *key)``.
    """
    v = np.asarray(voltages, dtype=np.float64)
    if v.shape[-1:] != (cond.rows,):
        raise DimensionError(f"input length {v.shape[-1:]} does not match {cond.rows} rows")
    analog_calls.bump()
    out = spec.tia_gain * (v @ cond.g)
    if noise.read_sigma_v > 0:
        rng = make_rng(noise.seed, TAG_READ, *key)
        out += noise.read_sigma_v * rng.standard_normal(out.shape)
    return out


def adc_quantize(voltages, spec: ConverterSpec) -> np.ndarray:
    """Saturating ADC with round-half-away-from-zero (inputs are clamped non-negative)."""
    v = np.clip(np.asarray(voltages, dtype=np.float64), 0.0, spec.adc_fullscale)
    return np.floor(v / spec.adc_fullscale * spec.adc_max_code + 0.5).astype(np.int64)


def calibrate_tia_gain(peak_current: float, spec: ConverterSpec, target_fraction: float = 0.8) -> ConverterSpec:
    """Return ``spec`` with the TIA gain that maps ``peak_current`` to ``target_fraction`` of ADC full scale."""
    if peak_current <= 0:
        raise ConfigError("peak current must be positive to calibrate the TIA")
    return replace(spec, tia_gain=target_fraction * spec.adc_fullscale / peak_current)
