"""Shared exception types."""


class NumericalError(RuntimeError):
    """A computation produced NaN/Inf or an otherwise unusable numeric state."""


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, unparsable value, missing file)."""


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""
