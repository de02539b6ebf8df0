"""Ten-core SoC: tiling logical matrices onto cores and running multi-tile VMMs.

Partial sums from tiles that share a column range are added as exact
integers after the ADC, which is what the on-chip CPU does with the codes it
reads back. No re-quantization happens after the sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import (
    CORE_COLS,
    CORE_ROWS,
    ConductanceMatrix,
    ConverterSpec,
    NoiseSpec,
    adc_quantize,
    analog_vmm,
    dac_encode,
    program_conductance,
)
from .errors import CapacityError, ConfigError, DimensionError

PLAN_HEADER = "# tileplan v1"


@dataclass(frozen=True)
class SocConfig:
    n_cores: int = 10
    core_rows: int = CORE_ROWS
    core_cols: int = CORE_COLS


@dataclass(frozen=True)
class Tile:
    core_id: int
    row_offset: int
    row_span: int
    col_offset: int
    col_span: int

    @property
    def rows(self) -> slice:
        return slice(self.row_offset, self.row_offset + self.row_span)

    @property
    def cols(self) -> slice:
        return slice(self.col_offset, self.col_offset + self.col_span)


@dataclass(frozen=True)
class TilePlan:
    logical_rows: int
    logical_cols: int
    tiles: tuple[Tile, ...]

    @property
    def cores(self) -> list[int]:
        return [t.core_id for t in self.tiles]

    @property
    def row_spans(self) -> list[int]:
        """Height of each distinct row block, top to bottom."""
        return [span for _, span in sorted({(t.row_offset, t.row_span) for t in self.tiles})]

    def to_text(self) -> str:
        lines = [PLAN_HEADER, f"# logical {self.logical_rows} {self.logical_cols}",
                 "# core_id row_offset row_span col_offset col_span"]
        lines += [f"{t.core_id} {t.row_offset} {t.row_span} {t.col_offset} {t.col_span}" for t in self.tiles]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> TilePlan:
        lines = text.splitlines()
        if not lines or lines[0].strip() != PLAN_HEADER:
            raise ConfigError("not a tile plan (missing version header)")
        logical = None
        tiles = []
        for line in lines[1:]:
            line = line.strip()
            if line.startswith("# logical"):
                logical = tuple(int(x) for x in line.split()[2:4])
            elif line and not line.startswith("#"):
                tiles.append(Tile(*(int(x) for x in line.split())))
        if logical is None:
            raise ConfigError("tile plan is missing its logical shape")
        return cls(logical[0], logical[1], tuple(tiles))


def plan_tiling(logical_rows: int, logical_cols: int, soc: SocConfig = SocConfig(),
                col_block: int | None = None, first_core: int = 0) -> TilePlan:
    """Greedy row-major split, one tile per core, core ids assigned from ``first_core``.

    Rows are cut into blocks of ``soc.core_rows`` (the last block takes the
    remainder); columns likewise with ``col_block`` (default ``soc.core_cols``).
    """
    if logical_rows < 1 or logical_cols < 1:
        raise DimensionError("logical matrix must be non-empty")
    col_block = soc.core_cols if col_block is None else col_block
    if not 0 < col_block <= soc.core_cols:
        raise ConfigError(f"column block {col_block} must lie in [1, {soc.core_cols}]")
    row_edges = list(range(0, logical_rows, soc.core_rows)) + [logical_rows]
    col_edges = list(range(0, logical_cols, col_block)) + [logical_cols]
    n_tiles = (len(row_edges) - 1) * (len(col_edges) - 1)
    if first_core + n_tiles > soc.n_cores:
        raise CapacityError(
            f"{logical_rows}x{logical_cols} needs {n_tiles} cores from core {first_core}, "
            f"SoC has {soc.n_cores}")
    tiles = []
    core = first_core
    for r0, r1 in zip(row_edges, row_edges[1:]):
        for c0, c1 in zip(col_edges, col_edges[1:]):
            tiles.append(Tile(core, r0, r1 - r0, c0, c1 - c0))
            core += 1
    return TilePlan(logical_rows, logical_cols, tuple(tiles))


def split_matrix(matrix, plan: TilePlan) -> list[np.ndarray]:
    matrix = np.asarray(matrix)
    if matrix.shape != (plan.logical_rows, plan.logical_cols):
        raise DimensionError(f"matrix {matrix.shape} does not match plan "
                             f"{plan.logical_rows}x{plan.logical_cols}")
    return [matrix[t.rows, t.cols] for t in plan.tiles]


def program_plan(matrix, plan: TilePlan, noise: NoiseSpec, bounds) -> list[ConductanceMatrix]:
    """Program each tile of a logical conductance matrix; tile ``k`` uses write stream ``k``."""
    return [program_conductance(block, noise, bounds, key=(k,))
            for k, block in enumerate(split_matrix(matrix, plan))]


def assemble(plan: TilePlan, tiles) -> np.ndarray:
    """Logical conductance matrix reassembled from its tiles."""
    out = np.empty((plan.logical_rows, plan.logical_cols))
    for t, cond in zip(plan.tiles, tiles):
        out[t.rows, t.cols] = cond.g
    return out


def soc_vmm(input_codes, plan: TilePlan, tiles, noise: NoiseSpec, spec: ConverterSpec,
            quantize: bool = True, key: tuple[int, ...] = ()) -> np.ndarray:
    """Run a logical VMM across the planned tiles.

    With ``quantize`` on, returns integer ADC codes summed across tiles that
    share columns. With it off (calibration mode) the ADC is bypassed and the
    post-TIA voltages are summed instead. Tile ``k`` reads noise from stream
    ``(*key, k)``.
    """
    codes = np.asarray(input_codes)
    if len(tiles) != len(plan.tiles):
        raise DimensionError(f"plan has {len(plan.tiles)} tiles, got {len(tiles)} programmed")
    if codes.shape[-1:] != (plan.logical_rows,):
        raise DimensionError(f"input length {codes.shape[-1:]} does not match {plan.logical_rows} rows")
    out = np.zeros(codes.shape[:-1] + (plan.logical_cols,), dtype=np.int64 if quantize else np.float64)
    for k, (t, cond) in enumerate(zip(plan.tiles, tiles)):
        if cond.shape != (t.row_span, t.col_span):
            raise DimensionError(f"tile {k} is {cond.shape}, plan expects {(t.row_span, t.col_span)}")
        v = dac_encode(codes[..., t.rows], spec)
        analog = analog_vmm(v, cond, noise, spec, key=(*key, k))
        out[..., t.cols] += adc_quantize(analog, spec) if quantize else analog
    return out
