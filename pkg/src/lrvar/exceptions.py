"""Exceptions shared across the package."""


class NumericalFailure(RuntimeError):
    """A dense linear-algebra routine failed to converge."""


class ContractionViolation(ValueError):
    """A transition matrix is not a strict contraction where one is required."""


class SampleTooSmall(ValueError):
    """The sample is too short for the requested rank-selection procedure."""


class NoRankJump(RuntimeError):
    """The rank path is flat, so no penalty constant can be calibrated."""


class ConfigError(ValueError):
    """A configuration document is malformed or contains unknown keys."""


class DataError(ValueError):
    """An input data file cannot be parsed into a usable trajectory."""
