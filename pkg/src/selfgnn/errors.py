class ConfigurationError(ValueError):
    """Invalid hyperparameter or model configuration."""


class DataError(ValueError):
    """Malformed, empty or inconsistent interaction data."""


class CheckpointError(ValueError):
    """Checkpoint file is corrupt, truncated or of an unknown version."""


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""
