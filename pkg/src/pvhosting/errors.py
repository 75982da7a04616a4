"""Exception hierarchy shared by every module."""


class HostingError(Exception):
    """Base class for all package errors."""


class InputError(HostingError, ValueError):
    """A value violates a documented precondition (sign, range, finiteness)."""


class DomainError(HostingError, ArithmeticError):
    """An operation is undefined for the given (otherwise valid) inputs."""


class DiagnosticError(HostingError, RuntimeError):
    """A numerical self-check failed; the result cannot be trusted."""
