"""Exception types shared across the package."""


class SpdError(Exception):
    """Base class for all errors raised by spdprob."""


class NotSPDError(SpdError, ValueError):
    """A matrix failed the symmetric positive definite check."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DimensionError(SpdError, ValueError):
    """Shapes of the arguments are incompatible."""


class NumericalError(SpdError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable values."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance.

    Attributes
    ----------
    last : object
        Last iterate reached by the solver.
    residual : float
        Residual (gradient norm or similar) at ``last``.
    trace : list
        Optional per-iteration diagnostics.
    """

    def __init__(self, message, last=None, residual=None, trace=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.trace = trace if trace is not None else []


class DatasetError(SpdError, ValueError):
    """Dataset ingestion failed.

    ``code`` is one of ``"parse"``, ``"not_spd"``, ``"length_mismatch"``
    and ``"io"``; ``index`` names the offending matrix when known.
    """

    def __init__(self, message, code, index=None):
        super().__init__(message)
        self.code = code
        self.index = index
