"""Exception hierarchy shared by the solvers.

The CLI maps :class:`NumericalFailure` subclasses to exit code 2.
"""


class LinniError(Exception):
    """Base class for all package errors."""


class NumericalFailure(LinniError):
    """A computation ran but did not produce a trustworthy answer."""


class IntegrationError(NumericalFailure):
    """Non-finite state encountered while integrating an ODE."""


class NoSignChange(NumericalFailure):
    """The shooting map keeps a constant sign on the requested bracket."""


class NonConvergence(NumericalFailure):
    """An iterative solver exhausted its iteration budget."""


class StallError(NumericalFailure):
    """Continuation step size underflowed.

    The partially traced branch is available as ``exc.branch``.
    """

    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


class KernelError(NumericalFailure):
    """The radial Neumann operator has a kernel; no Green's function exists."""


class InsufficientRange(LinniError):
    """Not enough extrema occur before the requested ``r_max``."""


class InsufficientTail(LinniError):
    """A branch is too short for the requested tail diagnostics."""


class UnsupportedDimension(LinniError):
    """The requested quantity is not defined in this dimension."""


class DimensionError(UnsupportedDimension):
    """An identity specific to one dimension was applied to another."""


class DivergentMoment(LinniError):
    """A bubble moment diverges in the requested dimension."""


class RegimeError(LinniError):
    """A formula was evaluated outside the exponent regime it describes."""
