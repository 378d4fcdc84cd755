"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``InvalidArgs`` -> 2, ``CapExceeded`` -> 3,
``NumericalFailure`` (and subclasses) -> 4.
"""


class GustatError(Exception):
    """Base class for all package errors."""


class InvalidArgs(GustatError, ValueError):
    """Arguments violate an operation's preconditions."""


class CapExceeded(GustatError):
    """An exhaustive enumeration would exceed the configured cap."""


class NumericalFailure(GustatError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class SingularDesign(NumericalFailure):
    """Least-squares design matrix is too ill-conditioned to solve."""


class DegenerateProjection(NumericalFailure):
    """First-order variance component is indistinguishable from zero."""
