"""Plain-text ``key = value`` configuration files.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Device keys: dac_bits, adc_bits, dac_fullscale_v, adc_fullscale_v,
tia_gain, v_high, v_low, read_sigma_v, write_sigma_g, g_min, g_max, seed.
The experiment harness adds its own keys on top (see ``harness.KEYS``).
"""

from __future__ import annotations

from pathlib import Path

from .device import G_MAX, G_MIN, ConverterSpec, NoiseSpec
from .errors import ConfigError

DEVICE_KEYS = {
    "dac_bits": int, "adc_bits": int, "dac_fullscale_v": float, "adc_fullscale_v": float,
    "tia_gain": float, "v_high": float, "v_low": float, "read_sigma_v": float,
    "write_sigma_g": float, "g_min": float, "g_max": float, "seed": int,
}


def parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv(text, str(path))


def typed(values: dict[str, str], schema: dict[str, type]) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        kind = schema[key]
        try:
            out[key] = parse_bool(raw) if kind is bool else kind(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return out


def device_specs(values: dict) -> tuple[ConverterSpec, NoiseSpec, tuple[float, float]]:
    """Build converter/noise specs and conductance bounds from typed values; unset keys keep defaults."""
    conv = {"dac_bits": "dac_bits", "adc_bits": "adc_bits", "dac_fullscale_v": "dac_fullscale",
            "adc_fullscale_v": "adc_fullscale", "tia_gain": "tia_gain", "v_high": "v_high", "v_low": "v_low"}
    noise = {"read_sigma_v": "read_sigma_v", "write_sigma_g": "write_sigma_g", "seed": "seed"}
    converter = ConverterSpec(**{field: values[key] for key, field in conv.items() if key in values})
    noise_spec = NoiseSpec(**{field: values[key] for key, field in noise.items() if key in values})
    bounds = (values.get("g_min", G_MIN), values.get("g_max", G_MAX))
    if not 0 <= bounds[0] < bounds[1]:
        raise ConfigError(f"invalid conductance bounds {bounds}")
    return converter, noise_spec, bounds


def load_device_config(path) -> tuple[ConverterSpec, NoiseSpec, tuple[float, float]]:
    return device_specs(typed(read_kv(path), DEVICE_KEYS))
