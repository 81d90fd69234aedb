"""Exception hierarchy shared by all modules."""


class HermiteBetaError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(HermiteBetaError, ValueError):
    """An argument is outside the set of values an operation accepts."""


class DomainError(ParameterError):
    """A geometric or spectral argument lies outside its admissible domain."""


class DegenerateSampleError(HermiteBetaError, ArithmeticError):
    """A random sample hit a probability-zero degenerate configuration."""


class NumericalInconsistencyError(HermiteBetaError, ArithmeticError):
    """Two independent numerical routes disagree."""
