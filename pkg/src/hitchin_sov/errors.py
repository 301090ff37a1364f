"""Exception hierarchy.

Every error carries an integer ``exit_code`` used by the command line front
end, so each failure mode maps to a distinct process status.
"""


class HitchinError(Exception):
    exit_code = 1


class SchemaError(HitchinError):
    """Malformed JSON input; ``path`` names the offending field."""

    exit_code = 3

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class NonConvergence(HitchinError):
    exit_code = 10

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class ZeroPolynomial(HitchinError):
    exit_code = 11


class SingularMatrix(HitchinError):
    exit_code = 12


class NotSquarefree(HitchinError):
    exit_code = 13


class UnsupportedRank(HitchinError):
    exit_code = 14


class UnsupportedType(HitchinError):
    exit_code = 15


class BranchPointDerivative(HitchinError):
    exit_code = 16


class NonGeneric(HitchinError):
    exit_code = 17


class ParityError(HitchinError):
    exit_code = 18


class EliminationDegenerate(HitchinError):
    exit_code = 19


class HypothesisViolated(HitchinError):
    exit_code = 20


class TrackingLoss(HitchinError):
    exit_code = 21


class SingularPeriodMatrix(HitchinError):
    exit_code = 22


class StepCollapse(HitchinError):
    exit_code = 23

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        HitchinError, SchemaError, NonConvergence, ZeroPolynomial,
        SingularMatrix, NotSquarefree, UnsupportedRank, UnsupportedType,
        BranchPointDerivative, NonGeneric, ParityError, EliminationDegenerate,
        HypothesisViolated, TrackingLoss, SingularPeriodMatrix, StepCollapse,
    )
}
