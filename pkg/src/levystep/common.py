"""Shared vocabulary: jump regions and package-level exceptions."""

from __future__ import annotations

import enum


class Region(enum.Enum):
    """Where a jump mark lives: inside the unit ball or on its complement."""

    SMALL = "small"
    TAIL = "tail"


class ConfigError(Exception):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class DivergentIntegralError(ValueError):
    """A requested moment of the jump measure is not absolutely convergent."""
