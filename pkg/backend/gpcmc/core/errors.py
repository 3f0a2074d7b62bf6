"""
Exception hierarchy for gpcmc.

Every error carries the process exit code the CLI reports for it:
2 for input and validation problems, 3 for numerical failures.
"""
from typing import Optional


class GpcmcError(Exception):
    """Root of all gpcmc errors"""
    exit_code: int = 1
    http_status: int = 500


class InvalidInputError(GpcmcError, ValueError):
    """Malformed, non-finite or inconsistent input"""
    exit_code = 2
    http_status = 422


class ContractError(GpcmcError):
    """A caller violated a precondition, e.g. mismatched model and covariance"""
    exit_code = 2
    http_status = 422


class OracleRefusedError(InvalidInputError):
    """An oracle was asked for a problem outside its feasible range"""


class DegenerateCovarianceError(GpcmcError):
    """A conditional variance fell to (or below) the clamp floor"""
    exit_code = 3

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class EmptyEnsembleError(GpcmcError):
    """No particle survived the acceptance test"""
    exit_code = 3


class DimensionFailureError(GpcmcError):
    """A sequential pass accepted zero points at some dimension"""
    exit_code = 3

    def __init__(self, dim: int, samples: int):
        self.dim = dim
        self.samples = samples
        super().__init__(
            f"no samples accepted at dimension {dim} with M={samples}; "
            "increase the number of samples per dimension"
        )


class TunerError(GpcmcError):
    """Every hyperparameter cell failed"""
    exit_code = 3


__all__ = [
    "GpcmcError",
    "InvalidInputError",
    "ContractError",
    "OracleRefusedError",
    "DegenerateCovarianceError",
    "EmptyEnsembleError",
    "DimensionFailureError",
    "TunerError",
]
