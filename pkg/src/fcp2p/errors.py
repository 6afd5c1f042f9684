"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input data: scenario, demand file, or parameter set."""


class DomainError(ValueError):
    """A model function was evaluated outside its domain."""
