"""Exception types shared across the package."""


class PpselectError(Exception):
    """Base class for errors raised by this package."""


class RankDeficiencyError(PpselectError):
    """Design matrix is rank deficient at the current iterate."""


class ConvergenceError(PpselectError):
    """An iterative solver ran out of iterations or oscillated.

    Carries the last iterate so callers can inspect how far the
    solver got before giving up.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NumericRangeError(PpselectError):
    """A computation left the representable floating point range."""


class DegenerateColumnError(PpselectError):
    """A design column is identically zero under the current weights."""


class LpError(PpselectError):
    """The linear programming solver hit a structural or numerical problem."""
