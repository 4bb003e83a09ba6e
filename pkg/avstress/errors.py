from __future__ import annotations


class AvstressError(Exception):
    """Base error for the stress-testing toolkit."""


class ConfigError(AvstressError, ValueError):
    """Raised for invalid scenario, solver or run configuration."""


class DimensionError(AvstressError, ValueError):
    """Raised when an action or state vector has the wrong dimension."""


class SimulatorContractError(AvstressError, RuntimeError):
    """Raised when a simulator is driven outside its contract (e.g. step after terminal)."""


class NonFiniteError(AvstressError, FloatingPointError):
    """Raised when an action or gradient holds NaN/inf components."""
