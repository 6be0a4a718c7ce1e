"""Exception types shared across the package."""


class MKLabError(Exception):
    """Base class for all package errors."""


class ConfigError(MKLabError):
    """Invalid configuration value."""


class FormatError(MKLabError):
    """Malformed binary file; carries the byte offset of the violation."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SplitError(MKLabError):
    """Open-set split cannot be performed."""


class PlanError(MKLabError):
    """Epoch planning failed (too few identities or faces)."""


class ShapeError(MKLabError):
    """Dimension mismatch between vectors or parameter blocks."""


class NumericError(MKLabError):
    """Non-finite value produced where a finite one is required."""


class TrainError(MKLabError):
    """Training aborted; message carries batch/pair diagnostics."""


class EvalError(MKLabError):
    """Evaluation cannot proceed (empty gallery, sizing, ...)."""
