"""
Core package: configuration, errors, logging and random streams.
"""
from .config import settings
from .errors import (
    ContractError,
    DegenerateCovarianceError,
    DimensionFailureError,
    EmptyEnsembleError,
    GpcmcError,
    InvalidInputError,
    OracleRefusedError,
    TunerError,
)

__all__ = [
    "settings",
    "GpcmcError",
    "InvalidInputError",
    "ContractError",
    "OracleRefusedError",
    "DegenerateCovarianceError",
    "EmptyEnsembleError",
    "DimensionFailureError",
    "TunerError",
]
