"""Shared exception types."""


class ConfigurationError(ValueError):
    """Bad scenario name, empty subgroup, malformed run configuration."""


class InvalidActionError(ValueError):
    """Blue action aimed at a host that cannot be targeted."""


class UsageError(RuntimeError):
    """An operation called outside its lifecycle (e.g. step after done)."""


class NumericError(ArithmeticError):
    """Non-finite value met where a finite one is required; names the term."""


class DimensionError(ValueError):
    """Objective-space operation asked for an unsupported dimensionality."""
