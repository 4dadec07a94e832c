"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FracCurvError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracCurvError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class MLOverflowError(DomainError, OverflowError):
    """A series term exceeds the largest representable float."""


class InvalidParameterError(FracCurvError, ValueError):
    """Constructor or operator parameters violate their preconditions."""


class ParseError(FracCurvError, ValueError):
    """Malformed expression text.

    ``offset`` is the byte offset into the source at which parsing failed.
    """

    def __init__(self, message: str, offset: int, text: str = ""):
        self.message = message
        self.offset = offset
        self.text = text
        super().__init__(f"{message} (at offset {offset})")


class UnknownIdentifierError(ParseError):
    """An identifier is neither a variable, a declared parameter nor a function."""


class UnboundParameterError(DomainError):
    """A parameter referenced by an expression has no value at evaluation time."""


class NonConvergenceError(FracCurvError, ArithmeticError):
    """A numerical limit failed to stabilise.

    ``samples`` holds the last evaluations that were compared.
    """

    def __init__(self, message: str, samples: tuple[float, ...] = ()):
        self.samples = tuple(samples)
        super().__init__(message)


class NotPositiveDefiniteError(DomainError):
    """A metric matrix is not positive definite at the queried point."""


class QuadratureError(DomainError):
    """Adaptive quadrature did not reach the requested accuracy."""


class GridPointError(DomainError):
    """Evaluation failed at a specific grid point during a scan."""

    def __init__(self, message: str, point: tuple[float, ...]):
        self.point = tuple(point)
        super().__init__(f"{message} at point {self.point}")


class DomainExitError(DomainError):
    """A geodesic left the metric's domain; ``path`` is the partial trajectory."""

    def __init__(self, message: str, path):
        self.path = path
        super().__init__(message)
