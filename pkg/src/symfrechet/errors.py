"""Exception hierarchy shared by all modules."""


class SymFrechetError(Exception):
    """Base class for library errors."""


class DomainError(SymFrechetError, ValueError):
    """An argument lies outside the domain of the operation (wrong space, bad range)."""


class ValidationError(SymFrechetError, ValueError):
    """Coordinates violate the constraints of their space."""


class DegenerateInputError(DomainError):
    """The inputs make the requested check vacuous."""


class PreconditionError(SymFrechetError, ValueError):
    """A statistical precondition (e.g. finite variance) does not hold."""


class ConfigError(SymFrechetError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
