"""Exception types shared across the package."""


class FracPerimError(Exception):
    """Base class for all package errors."""


class ArgumentError(FracPerimError, ValueError):
    """Invalid argument: wrong space, out-of-range parameter, bad point id."""


class DomainError(FracPerimError, ValueError):
    """Input lies outside the mathematical domain of an operation (singular kernel, overlapping intervals)."""


class ConstructionError(FracPerimError, RuntimeError):
    """A construction could not produce an object satisfying its invariants."""


class ResourceLimitError(FracPerimError, RuntimeError):
    """Requested size exceeds a declared resource budget."""


class InternalError(FracPerimError, RuntimeError):
    """An algorithm failed a condition that must hold for valid inputs."""
