"""Exception hierarchy.

Every error carries a ``kind`` used by the command line driver to pick an
exit status: ``"io"`` (2), ``"validation"`` (3) or ``"numerical"`` (4).
"""

from __future__ import annotations


class GeoscaleError(Exception):
    kind = "numerical"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class InputError(GeoscaleError):
    kind = "io"


class ValidationError(GeoscaleError, ValueError):
    kind = "validation"


class NumericalError(GeoscaleError, ArithmeticError):
    kind = "numerical"


# audio_features
class UnsupportedFormat(InputError):
    pass


class EmptyFile(InputError):
    pass


class ClipTooShort(ValidationError):
    pass


class BandOutOfRange(ValidationError):
    pass


class ConfigMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class RankDeficient(NumericalError):
    pass


# geometry_core
class NonMonotonicTimes(ValidationError):
    pass


class UnsupportedDimension(ValidationError):
    pass


class NoValidNodes(NumericalError):
    pass


class OutOfDomain(NumericalError):
    pass


class LeftDomain(NumericalError):
    """A geodesic left the valid region; ``exit_parameter`` is where."""

    def __init__(self, message: str, exit_parameter: float | None = None, **context):
        super().__init__(message, exit_parameter=exit_parameter, **context)
        self.exit_parameter = exit_parameter


# scale_chart
class DependentVectors(NumericalError):
    pass


class TimeOutOfRange(ValidationError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message: str, residual: float | None = None, **context):
        super().__init__(message, residual=residual, **context)
        self.residual = residual


class SelfTestFailed(NumericalError):
    pass


# invariance_harness
class OutOfBox(ValidationError):
    pass


class NoOverlap(ValidationError):
    pass
