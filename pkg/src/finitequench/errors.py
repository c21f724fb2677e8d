"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the documented domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical consistency check failed (norm drift, completeness, ...)."""


class AbortedRunError(NumericalError):
    """Time integration was stopped because an invariant was violated."""


class InvalidStateError(ValueError):
    """A state or basis does not satisfy the structure an operation needs."""


class UncertifiableProtocolError(ValueError):
    """The protocol has no decay certificate ||dH(t)|| <= K / t**(2 + eps)."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated.

    ``field`` names the offending key (``section.key``) for semantic errors,
    ``lineno`` carries the line number for syntax errors.
    """

    def __init__(self, message, field=None, lineno=None):
        super().__init__(message)
        self.field = field
        self.lineno = lineno
