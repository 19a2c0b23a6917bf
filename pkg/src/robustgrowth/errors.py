"""Exception types shared across the library."""


class RobustGrowthError(Exception):
    """Base class for all library errors."""


class SingularInputError(RobustGrowthError):
    """A covariance matrix is not symmetric positive definite."""


class DomainError(RobustGrowthError):
    """A point or a parameter lies outside the admissible domain."""


class UnsupportedDimensionError(RobustGrowthError):
    """The operation is only available in lower dimensions (or needs a certificate)."""


class DensityUnderflowError(DomainError):
    """The invariant density underflowed below the evaluation floor at some point."""


class FellerConditionError(DomainError):
    """Square-root factor parameters violate 2*kappa*nu > sigma**2."""


class SimulationError(RobustGrowthError):
    """A Monte-Carlo run had to abort (too many non-finite paths, bad horizon grid)."""


class ConfigError(RobustGrowthError):
    """Invalid run configuration; the CLI maps this to exit code 2."""
