"""Exception types shared across the package."""


class UrnSchemeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(UrnSchemeError, ValueError):
    """A distribution or experiment cannot be built as requested."""


class DomainError(UrnSchemeError, ValueError):
    """An argument lies outside the domain of a function."""


class ContractError(UrnSchemeError, ValueError):
    """Inputs violate an operation's preconditions (shapes, sizes, pairing)."""


class NumericalError(UrnSchemeError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            extra = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} ({extra})"
        super().__init__(message)
