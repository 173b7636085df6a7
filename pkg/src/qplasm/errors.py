"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures (poles, singularities, ambiguous searches) with 3.
"""


class QplasmError(Exception):
    """Base class for toolkit errors."""


class DomainError(QplasmError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(QplasmError, ValueError):
    """A configuration is malformed or physically inconsistent."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericalError(QplasmError, ArithmeticError):
    """A numerical evaluation failed; ``operation`` names the culprit."""

    def __init__(self, message, operation=None):
        self.operation = operation
        if operation:
            message = f"{operation}: {message}"
        super().__init__(message)


class PoleError(NumericalError):
    """Evaluation at a pole of a closed-form expression."""


class SingularityError(NumericalError):
    """A closed form diverges; ``pole`` holds the singular location."""

    def __init__(self, message, operation=None, pole=None):
        self.pole = pole
        super().__init__(message, operation)


class AmbiguityError(NumericalError):
    """A search window holds zero or several candidates."""

    def __init__(self, message, operation=None, candidates=()):
        self.candidates = tuple(candidates)
        super().__init__(message, operation)


class ResourceError(QplasmError, MemoryError):
    """A Fock-space truncation would exceed the configured hard cap."""


class ModelError(QplasmError, ValueError):
    """An outcome model violates normalization."""


class DifferentiationError(NumericalError):
    """A finite-difference stencil is inconsistent (e.g. norm drift)."""


class CatalogError(QplasmError, KeyError):
    """Unknown bound catalog entry or missing parameters."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class BoundaryError(DomainError):
    """Parameter on a boundary where a bound diverges or degenerates."""


class ZeroSignalError(NumericalError):
    """Signal vanishes, so a signal-to-noise ratio is undefined."""


class DegenerateInputError(DomainError):
    """Input carries no photons where a ratio needs them."""
