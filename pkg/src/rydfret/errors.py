"""Exception hierarchy. The CLI maps each category to its own exit code."""


class RydfretError(Exception):
    exit_code = 1


class ConfigError(RydfretError, ValueError):
    """Bad or missing configuration (unknown key, missing unit, absent defect row)."""

    exit_code = 2


class DomainError(RydfretError, ValueError):
    """Arguments outside the domain of an operation."""

    exit_code = 3


class NumericalError(RydfretError, ArithmeticError):
    """A numerical routine failed; ``diagnostics`` carries context."""

    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ModelError(RydfretError):
    """The physical model cannot answer the question (no root, near degeneracy)."""

    exit_code = 5


class ResourceError(RydfretError):
    """A problem would exceed a configured size cap."""

    exit_code = 6


class EnsembleError(RydfretError):
    """Too many failed shots in an ensemble."""

    exit_code = 7
