"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent observation data."""


class NonIdentifiableError(RuntimeError):
    """A cause-stress cell has no observed failures, so the likelihood
    has no finite maximum."""


class SolverError(RuntimeError):
    """A numerical root-finder failed to converge."""


class InitializationError(RuntimeError):
    """MCMC chains could not find a finite starting point."""


class CriterionError(RuntimeError):
    """A design criterion could not be evaluated at a grid point."""


class ConfigError(ValueError):
    """A run configuration violates a module precondition."""
