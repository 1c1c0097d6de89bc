"""Exception hierarchy shared by the library and the command line front end."""


class DynFpcaError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DynFpcaError, ValueError):
    """A parameter violates the documented precondition of an operation."""


class PreconditionError(DynFpcaError, ValueError):
    """Input data is in the wrong state (e.g. not centered, basis mismatch)."""


class DataError(DynFpcaError, ValueError):
    """Malformed input file or data content."""


class NumericalError(DynFpcaError, ArithmeticError):
    """Singular systems, nonstationary models, overflow and similar failures."""
