"""Exception hierarchy shared by every module."""


class VakoError(Exception):
    """Base class for all library errors."""


class NumericalError(VakoError):
    """A numerical procedure failed; ``time`` is set when the failure has a
    location along a trajectory."""

    def __init__(self, message="", time=None):
        super().__init__(message)
        self.time = time

    def __str__(self):
        msg = super().__str__()
        if self.time is not None:
            return f"{msg} (at t={self.time!r})"
        return msg


class NonFiniteEvaluation(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class MaxIterations(NumericalError):
    def __init__(self, message="", best=None, residual=None, time=None):
        super().__init__(message, time=time)
        self.best = best
        self.residual = residual


class DegenerateFrame(NumericalError):
    pass


class NotHyperRegular(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NonHorizontal(NumericalError):
    pass


class InconsistentControls(NumericalError):
    pass


class NotOnSubmanifold(NumericalError):
    pass


class RankDeficientConstraint(NumericalError):
    pass


class NoSolutionFound(VakoError):
    def __init__(self, message="", best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DimensionMismatch(VakoError, ValueError):
    pass


class UnknownProblem(VakoError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown problem"
