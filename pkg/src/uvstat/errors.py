"""Exception types shared across the package."""


class UvstatError(Exception):
    """Base class for all package errors."""


class SpecError(UvstatError):
    """Invalid model specification (bad probabilities, reducible chain, ...)."""


class ConfigError(UvstatError):
    """Malformed or inconsistent run configuration."""


class BudgetExceededError(UvstatError):
    """An exact-enumeration budget would be exceeded."""


class DegenerateVarianceError(UvstatError):
    """Standardization requested for a statistic with (numerically) zero variance."""


class PreconditionError(UvstatError):
    """An operation's mathematical precondition does not hold for the inputs."""
