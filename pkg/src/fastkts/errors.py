"""Exception hierarchy.

Every error carries a distinct ``exit_code`` so the CLI can map failures to
process status without a lookup table.
"""

from __future__ import annotations


class FastKTSError(Exception):
    exit_code = 1


class InvalidData(FastKTSError):
    exit_code = 10


class InvalidBandwidth(FastKTSError):
    exit_code = 11


class InsufficientData(FastKTSError):
    exit_code = 12


class DegenerateBandwidth(FastKTSError):
    exit_code = 13


class SampleTooSmall(FastKTSError):
    exit_code = 14


class BlockTooSmall(FastKTSError):
    exit_code = 15


class DegenerateBlock(FastKTSError):
    exit_code = 16

    def __init__(self, message: str, block_index: int | None = None):
        super().__init__(message)
        self.block_index = block_index


class DegenerateStatistic(FastKTSError):
    exit_code = 17


class UnbalancedNotSupported(FastKTSError):
    exit_code = 18


class InvalidSpec(FastKTSError):
    exit_code = 19


class NumericalError(FastKTSError):
    exit_code = 20


class ParseError(FastKTSError):
    exit_code = 21

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class FormatError(FastKTSError):
    exit_code = 22


class ConfigError(FastKTSError):
    """Bad command-line or API configuration (e.g. alpha outside (0, 1))."""

    exit_code = 2
