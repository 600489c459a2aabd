"""
EXCEPTIONS.PY - Domain errors shared by every viscprof app

Each error carries a human readable message and an optional ``details``
dict (witness points, residuals, iterate history) that the CLI writes into
its JSON reports.
"""

from typing import Any, Dict, Optional


class ViscprofError(Exception):
    """Base class for all viscprof errors"""

    code = 'error'

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(str(message))
        self.message = str(message)
        self.details = details or {}

    def as_dict(self) -> Dict[str, Any]:
        return {'error': self.code, 'message': self.message, 'details': self.details}


class InvalidInputError(ViscprofError, ValueError):
    code = 'invalid-input'


class UsageError(InvalidInputError):
    """A command was called with missing or inconsistent options"""

    code = 'usage'


class NumericFailureError(ViscprofError):
    code = 'numeric-failure'


class RangeError(ViscprofError):
    code = 'range'


class DomainError(ViscprofError):
    code = 'domain'


class StiffnessError(ViscprofError):
    code = 'stiffness'


class NoContractionError(ViscprofError):
    code = 'no-contraction'


class NoConvergenceError(ViscprofError):
    code = 'no-convergence'


class NoConnectionError(ViscprofError):
    code = 'no-connection'


class HyperbolicityError(ViscprofError):
    code = 'hyperbolicity'


class DegenerateEigenvalueError(ViscprofError):
    code = 'degenerate-eigenvalue'


class ClassificationError(ViscprofError):
    code = 'classification'


class ReductionError(ViscprofError):
    code = 'reduction'


class SingularReductionError(ViscprofError):
    code = 'singular-reduction'


class DecompositionError(ViscprofError):
    code = 'decomposition'


class HypothesisFailure(ViscprofError):
    """Raised when a construction needs hypotheses that the checker rejected"""

    code = 'hypothesis-failure'

    def __init__(self, message: str, report: Any = None):
        details = report.to_dict() if report is not None else {}
        super().__init__(message, details)
        self.report = report


# Results that are a negative answer, not a crash (CLI exit code 2)
NEGATIVE_RESULTS = (NoConnectionError, NoConvergenceError, HypothesisFailure, ClassificationError)
