"""Exception hierarchy.

Every error a pipeline stage can raise derives from :class:`RestdiagError`.
Errors that signal a violated mathematical precondition derive from
:class:`PreconditionFailed`; the CLI maps those to exit status 2.
"""


class RestdiagError(Exception):
    """Base class for all package errors."""


class PreconditionFailed(RestdiagError):
    """A hypothesis of the requested construction does not hold.

    ``condition`` names the failed hypothesis so that reports can say which
    direction of an "if and only if" broke.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition or type(self).__name__


class TailAlgebraError(RestdiagError):
    """The requested arithmetic would produce an unrepresentable tail."""


class DimMismatch(RestdiagError):
    pass


class NonCompactTail(PreconditionFailed):
    pass


class TailMismatch(PreconditionFailed):
    pass


class NotFredholmPair(PreconditionFailed):
    pass


class KernelMismatch(PreconditionFailed):
    pass


class TotalCodimNonzero(PreconditionFailed):
    pass


class NotCompactDefect(PreconditionFailed):
    pass


class OverlapNotFiniteRank(PreconditionFailed):
    pass


class NoValidIndex(PreconditionFailed):
    pass


class CodimNonzero(PreconditionFailed):
    def __init__(self, message, index=None):
        super().__init__(message, condition="codimension")
        self.index = index


class ConditionsFail(PreconditionFailed):
    pass


class NotOrthonormal(PreconditionFailed):
    pass


class NotDiagonalizing(PreconditionFailed):
    pass


class OutOfRange(PreconditionFailed):
    pass


class DistinctnessUnreachable(RestdiagError):
    pass


class SquareEqualsIdeal(PreconditionFailed):
    pass


class ZeroCoefficient(PreconditionFailed):
    pass


class UnboundedMismatch(PreconditionFailed):
    pass


class SupportExceedsDim(PreconditionFailed):
    pass


class SpectrumMismatch(PreconditionFailed):
    pass


class StageError(PreconditionFailed):
    """Wraps an error raised inside one stage of a multi-stage pipeline."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}", condition=getattr(cause, "condition", stage))
        self.stage = stage
        self.cause = cause
