"""Shared exception types."""


class InvalidInputError(ValueError):
    """Structurally invalid data passed to an operation."""


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration."""


class StatisticsError(ValueError):
    """A statistic is undefined for the given sample (too few points)."""


class PipelineError(RuntimeError):
    """A denoising run aborted, e.g. on non-finite intermediate values."""
