"""Memristive-SoC simulator and hardware-aware HDC language classifier."""

__version__ = "0.1.0"
