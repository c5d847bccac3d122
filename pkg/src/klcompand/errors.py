"""Exception types raised across the package."""


class KLCompandError(Exception):
    """Base class for all package errors."""


class ParameterError(KLCompandError, ValueError):
    """A constructor or function parameter lies outside its valid domain."""


class DomainError(KLCompandError, ValueError):
    """An input value lies outside the domain of an operation."""


class NumericalError(KLCompandError, ArithmeticError):
    """A numerical routine (quadrature, root finding, inversion) failed."""


class SolverError(NumericalError):
    """A root bracket did not contain a sign change."""


class InfeasibleError(NumericalError):
    """A normalizing integral diverges, so the requested object does not exist."""


class SizeError(KLCompandError, ValueError):
    """An exhaustive search instance exceeds the desk-scale limit."""


class ParseError(KLCompandError, ValueError):
    """Malformed input file.

    Parameters
    ----------
    message : str
        Description of the problem.
    line : int, optional
        1-based line number where the problem was found.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDistributionError(KLCompandError, ValueError):
    """No symbols were counted, so no distribution can be formed."""
