"""Exception hierarchy.  Every error raised on purpose derives from AcxError,
so the CLI can turn it into a structured record."""


class AcxError(Exception):
    kind = "error"


class DimensionError(AcxError, ValueError):
    kind = "dimension"


class DomainError(AcxError, ValueError):
    kind = "domain"


class ParameterError(AcxError, ValueError):
    kind = "parameter"


class InputError(AcxError, ValueError):
    kind = "input"


class DataError(AcxError, ValueError):
    kind = "data"


class PreconditionError(AcxError, ValueError):
    kind = "precondition"


class DegeneratePointError(AcxError, ValueError):
    kind = "degenerate_point"


class ConvergenceError(AcxError, RuntimeError):
    kind = "convergence"

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class CertificateRejected(AcxError):
    kind = "certificate_rejected"


class SearchRangeError(AcxError):
    kind = "search_range"


class InconclusiveError(AcxError):
    kind = "inconclusive"


class AssemblyError(AcxError):
    kind = "assembly"


class ConditioningError(AcxError):
    kind = "conditioning"


class ModelDegeneracyError(AcxError):
    kind = "model_degeneracy"
