"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing pieces, corrupt, or incompatible."""


class TrainingAborted(RuntimeError):
    """A non-finite loss or model output forced the run to stop."""
