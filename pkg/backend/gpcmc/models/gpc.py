"""
Classifier models for gpcmc.

This module defines the training-order bookkeeping, the fitted model,
predictions, tuning results and the request bodies of the classifier API.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from gpcmc.models.kernel import Dataset, KernelSpec
from gpcmc.models.orthant import EstimateReport, ParticleEnsemble


class Ordering(str, Enum):
    """How training patterns are ordered before the covariance is built"""
    INTERLEAVE = "interleave"
    SEEDED_SHUFFLE = "shuffle"
    AS_GIVEN = "as-given"


@dataclass(frozen=True)
class LabelSigns:
    """Diagonal of C' in training order, plus the permutation that produced it"""
    signs: np.ndarray
    permutation: np.ndarray
    mode: Ordering = Ordering.INTERLEAVE


@dataclass(frozen=True)
class GpcModel:
    """
    A fitted classifier. Immutable: predictions read it and never update it.

    r_train is C'(I + Sigma)C' in training order, q_final its inverse as built
    by the moment recursion, particles the surviving strings after the last
    training dimension. `replicate` is the pass index that selected the
    random streams.
    """
    train: Dataset
    kernel: KernelSpec
    ordering: LabelSigns
    r_train: np.ndarray
    q_final: np.ndarray
    particles: ParticleEnsemble
    per_dim_p: np.ndarray
    log_marginal: float
    report: EstimateReport
    samples: int
    seed: int
    fingerprint: str
    replicate: int = 0

    @property
    def n_train(self) -> int:
        return self.train.n


class Prediction(BaseModel):
    """Class 1 posterior of one test pattern"""
    index: int = Field(..., ge=0, description="Test pattern index")
    posterior: float = Field(..., ge=0.0, le=1.0, description="Estimated P(y* = +1)")
    predicted_class: int = Field(..., description="+1 if posterior >= 0.5, else -1")
    test_cond_var: float = Field(..., gt=0.0, description="Conditional variance used for the draws")
    accepted: int = Field(..., ge=0, description="Draws landing on v >= 0")
    std_error: float = Field(..., ge=0.0, description="Binomial standard error of the posterior")

    @model_validator(mode="after")
    def class_matches_posterior(self) -> "Prediction":
        expected = 1 if self.posterior >= 0.5 else -1
        if self.predicted_class != expected:
            raise ValueError("predicted_class must follow the posterior >= 0.5 rule")
        return self


class TuneStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"


class TuneResult(BaseModel):
    """One ranked cell of a hyperparameter grid"""
    rank: int = Field(..., ge=1)
    grid_index: int = Field(..., ge=0)
    kernel: KernelSpec
    log_marginal: float = Field(..., description="-inf for failed cells")
    status: TuneStatus = TuneStatus.OK
    reason: Optional[str] = None
    seconds: float = Field(0.0, ge=0.0)


class FitPredictRequest(BaseModel):
    """Request body for the fit-and-predict endpoint"""
    train_features: List[List[float]] = Field(..., min_length=1)
    train_labels: List[int] = Field(..., min_length=1)
    test_features: List[List[float]] = Field(default_factory=list)
    kernel: KernelSpec
    samples: int = Field(100_000, ge=100, le=10_000_000)
    seed: int = Field(0, ge=0)
    ordering: Ordering = Ordering.INTERLEAVE


class FitPredictResponse(BaseModel):
    """Log marginal likelihood and test posteriors of one fit"""
    log_marginal: float
    n_train: int
    samples: int = Field(..., description="Points per dimension, all passes")
    passes: int = Field(1, ge=1, description="Independent passes the points were split into")
    predictions: List[Prediction]


class TuneRequest(BaseModel):
    """Request body for the tuning endpoint"""
    train_features: List[List[float]] = Field(..., min_length=1)
    train_labels: List[int] = Field(..., min_length=1)
    grid: List[KernelSpec] = Field(..., min_length=1)
    samples: int = Field(10_000, ge=100, le=10_000_000)
    seed: int = Field(0, ge=0)


__all__ = [
    "Ordering",
    "LabelSigns",
    "GpcModel",
    "Prediction",
    "TuneStatus",
    "TuneResult",
    "FitPredictRequest",
    "FitPredictResponse",
    "TuneRequest",
]
