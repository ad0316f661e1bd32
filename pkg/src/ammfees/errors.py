"""Exception hierarchy shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class BoundaryError(IndexError):
    """Access to a grid side that is undefined at a boundary index."""


class ContractError(ValueError):
    """Inputs violate a precondition linking two objects (shape, coverage, order)."""


class ConfigError(ValueError):
    """A configuration value violates a model invariant."""


class NumericalError(RuntimeError):
    """A computation left its validity region (exponent overflow, ODE blow-up)."""
