"""Exception hierarchy.

Synthesis failures carry the violated condition and the offending indices so
that callers (and the command line front end) can report them verbatim.
"""


class FDIError(Exception):
    """Base class for all errors raised by fdisynth."""


class DimensionMismatch(FDIError, ValueError):
    pass


class DomainMismatch(FDIError, ValueError):
    pass


class SingularE(FDIError, ValueError):
    pass


class IrregularPencil(FDIError, ValueError):
    pass


class SingularAtFrequency(FDIError, ValueError):
    pass


class UnstableOperand(FDIError, ValueError):
    pass


class H2Undefined(FDIError, ValueError):
    pass


class EmptyNullspace(FDIError):
    pass


class UndetectablePair(FDIError):
    pass


class RankDeficient(FDIError):
    pass


class NonStandardProblem(FDIError):
    """Boundary zeros make the outer factor's inverse unstable or improper."""

    def __init__(self, message, zeros=()):
        super().__init__(message)
        self.zeros = tuple(zeros)


class NoAdmissibleCombination(FDIError):
    pass


class ImproperResult(FDIError):
    pass


class SynthesisFailure(FDIError):
    """A solvability condition is violated; no filter exists.

    Attributes
    ----------
    condition : str
        Identifier of the violated condition, e.g. ``"complete-fault-detectability"``.
    indices : tuple
        Offending fault indices (0-based) or ``(row, fault)`` pairs.
    """

    def __init__(self, message, condition, indices=()):
        super().__init__(message)
        self.condition = condition
        self.indices = tuple(indices)


class NotDetectable(SynthesisFailure):
    pass


class NotIsolable(SynthesisFailure):
    pass


class NotStronglyIsolable(SynthesisFailure):
    pass


class ParseError(FDIError, ValueError):
    pass


class ValidationError(FDIError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UnstableFilter(FDIError, ValueError):
    pass
