"""Exception hierarchy. The CLI maps each category to its own exit code."""


class MemHdcError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(MemHdcError, ValueError):
    category = "config"
    exit_code = 2


class CorpusError(MemHdcError):
    category = "corpus"
    exit_code = 3


class DimensionError(MemHdcError, ValueError):
    """Shape mismatch or a tile that does not fit the physical core."""

    category = "dimension"
    exit_code = 4


class CapacityError(MemHdcError):
    """More tiles requested than the SoC has cores."""

    category = "capacity"
    exit_code = 4


class DegenerateModelError(MemHdcError, ValueError):
    category = "model"
    exit_code = 4


class ComparisonError(MemHdcError):
    category = "compare"
    exit_code = 5
