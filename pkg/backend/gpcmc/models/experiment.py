"""
Experiment models for gpcmc.

This module defines the synthetic problem specifications, the per-cell metric
report and the named presets used to reproduce the accuracy tables.
"""
import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gpcmc.models.kernel import KernelSpec


class ExperimentName(str, Enum):
    EXP1 = "exp1"
    EXP2 = "exp2"
    RBF_SANITY = "rbf-sanity"


class Metric(str, Enum):
    """Accuracy measures reported per cell"""
    MAPE_LOG_INTEGRAL = "mape_log_integral"
    MAE_POSTERIOR = "mae_posterior"
    MAPE_LOG_MARGINAL = "mape_log_marginal"
    MAE_BAYES_POSTERIOR = "mae_bayes_posterior"


class SyntheticProblemSpec(BaseModel):
    """
    Single-feature two-class problem with Gaussian class-conditional densities.

    Equal priors: the first ceil(n/2) patterns of each set are class +1.
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    n_train: int = Field(..., ge=2)
    n_test: int = Field(..., ge=1)
    mean1: float = Field(..., allow_inf_nan=False)
    mean2: float = Field(..., allow_inf_nan=False)
    std1: float = Field(..., gt=0, allow_inf_nan=False)
    std2: float = Field(..., gt=0, allow_inf_nan=False)
    seed: int = Field(0, ge=0, description="Offset mixed into the experiment seed")


class MultivariateProblemSpec(BaseModel):
    """
    Gaussian class-conditional problem in `dim` dimensions: class +1 ~ N(0, I),
    class -1 ~ N(offset * e_dim, S) where S has `diag` on the diagonal and
    `rho` on the first off-diagonals. In two dimensions S = [[diag, rho], [rho, diag]].
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    n_train: int = Field(..., ge=2)
    n_test: int = Field(..., ge=1)
    offset: float = Field(..., allow_inf_nan=False)
    dim: int = Field(2, ge=2, description="Number of features")
    rho: float = Field(0.25, allow_inf_nan=False, description="First off-diagonal of S")
    diag: float = Field(1.0, gt=0, allow_inf_nan=False, description="Diagonal of S")
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def positive_definite(self) -> "MultivariateProblemSpec":
        if np.linalg.eigvalsh(self.cov2).min() <= 0:
            raise ValueError("class -1 covariance is not positive definite")
        return self

    @property
    def mean1(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def mean2(self) -> np.ndarray:
        mean = np.zeros(self.dim)
        mean[-1] = self.offset
        return mean

    @property
    def cov1(self) -> np.ndarray:
        return np.eye(self.dim)

    @property
    def cov2(self) -> np.ndarray:
        band = np.eye(self.dim, k=1) + np.eye(self.dim, k=-1)
        return self.diag * np.eye(self.dim) + self.rho * band


class MetricReport(BaseModel):
    """One table cell: a metric averaged over problems or runs"""
    metric: Metric
    problem: str = Field(..., description="Problem name or dimension label")
    n: int = Field(..., ge=1, description="Number of dimensions / training patterns")
    samples: int = Field(..., ge=1, description="M, points per dimension")
    kernel: Optional[str] = None
    value: float = Field(..., description="Mean of per_run; NaN when every run failed")
    std_error: float = Field(..., description="Sample standard deviation / sqrt(runs)")
    runs: int = Field(..., ge=0, description="Runs that produced a value")
    failures: int = Field(0, ge=0, description="Runs that hit a dimension failure")
    per_run: List[float] = Field(default_factory=list)
    seconds: float = Field(0.0, ge=0.0, description="Summed wall-clock time of the cell's jobs")

    @model_validator(mode="after")
    def consistent(self) -> "MetricReport":
        if self.runs != len(self.per_run):
            raise ValueError("runs must equal the number of per-run values")
        if self.per_run and not math.isclose(
            self.value, math.fsum(self.per_run) / self.runs, rel_tol=1e-12, abs_tol=1e-300
        ):
            raise ValueError("value must be the mean of the per-run values")
        return self

    @classmethod
    def from_values(
        cls,
        metric: Metric,
        values: List[float],
        failures: int = 0,
        **cell,
    ) -> "MetricReport":
        runs = len(values)
        if runs == 0:
            mean, se = math.nan, math.nan
        else:
            mean = math.fsum(values) / runs
            se = float(np.std(values, ddof=1)) / math.sqrt(runs) if runs > 1 else 0.0
        return cls(
            metric=metric,
            value=mean,
            std_error=se,
            runs=runs,
            failures=failures,
            per_run=list(values),
            **cell,
        )


# Full-scale M list, largest first
FULL_SAMPLE_LIST: Tuple[int, ...] = (3_000_000, 1_000_000, 300_000, 100_000, 30_000, 10_000)

EXPERIMENT1_DIMS: Tuple[int, ...] = (50, 200, 500)
EXPERIMENT1_PROBLEMS_PER_CELL = 50

EXPERIMENT2_RUNS = 20
EXPERIMENT2_PROBLEMS: Dict[str, SyntheticProblemSpec] = {
    spec.name: spec
    for spec in (
        SyntheticProblemSpec(
            name="problem-1", n_train=100, n_test=50, mean1=0.0, mean2=1.0, std1=0.2, std2=0.3
        ),
        SyntheticProblemSpec(
            name="problem-2", n_train=200, n_test=100, mean1=0.0, mean2=1.0, std1=2.0, std2=1.0
        ),
        SyntheticProblemSpec(
            name="problem-3", n_train=400, n_test=200, mean1=0.0, mean2=1.5, std1=0.5, std2=0.75
        ),
        SyntheticProblemSpec(
            name="problem-4", n_train=800, n_test=400, mean1=0.0, mean2=1.0, std1=1.0, std2=0.75
        ),
    )
}

RBF_SANITY_PROBLEMS: Dict[str, MultivariateProblemSpec] = {
    spec.name: spec
    for spec in (
        MultivariateProblemSpec(name="rbf-1", n_train=20, n_test=50, offset=1.0),
        MultivariateProblemSpec(name="rbf-2", n_train=50, n_test=50, offset=1.0),
        MultivariateProblemSpec(name="rbf-3", n_train=200, n_test=200, offset=1.0),
        MultivariateProblemSpec(name="rbf-4", n_train=50, n_test=50, offset=0.5),
        MultivariateProblemSpec(name="rbf-5", n_train=50, n_test=50, offset=2.0),
        MultivariateProblemSpec(
            name="rbf-6", n_train=50, n_test=50, offset=1.0, dim=10, rho=0.2, diag=0.5
        ),
        MultivariateProblemSpec(name="rbf-7", n_train=1000, n_test=1000, offset=1.0),
    )
}

RBF_SANITY_GRID: Tuple[KernelSpec, ...] = tuple(
    KernelSpec.rbf(alpha, beta)
    for alpha, beta in ((5.0, 1.0), (5.0, 5.0), (3.0, 2.0), (0.5, 0.5), (3.0, 1.0), (0.5, 3.0))
)
RBF_SANITY_RUNS = 10


class ExperimentScale(BaseModel):
    """Cell counts and M lists for one experiment run"""
    model_config = ConfigDict(frozen=True)

    dims: Tuple[int, ...] = EXPERIMENT1_DIMS
    problems: Tuple[str, ...] = tuple(EXPERIMENT2_PROBLEMS)
    sanity_problems: Tuple[str, ...] = tuple(RBF_SANITY_PROBLEMS)
    m_values: Tuple[int, ...] = FULL_SAMPLE_LIST
    problems_per_cell: int = Field(EXPERIMENT1_PROBLEMS_PER_CELL, ge=1)
    runs: int = Field(EXPERIMENT2_RUNS, ge=1)
    sanity_runs: int = Field(RBF_SANITY_RUNS, ge=1)
    sanity_samples: int = Field(100_000, ge=100)

    @classmethod
    def full(cls) -> "ExperimentScale":
        return cls()

    @classmethod
    def desk(cls) -> "ExperimentScale":
        """Small enough for a laptop or CI run."""
        return cls(
            dims=(50,),
            problems=("problem-1",),
            sanity_problems=("rbf-1",),
            m_values=(100_000, 10_000),
            problems_per_cell=EXPERIMENT1_PROBLEMS_PER_CELL,
            runs=EXPERIMENT2_RUNS,
            sanity_runs=3,
            sanity_samples=10_000,
        )


__all__ = [
    "ExperimentName",
    "Metric",
    "SyntheticProblemSpec",
    "MultivariateProblemSpec",
    "MetricReport",
    "ExperimentScale",
    "FULL_SAMPLE_LIST",
    "EXPERIMENT1_DIMS",
    "EXPERIMENT1_PROBLEMS_PER_CELL",
    "EXPERIMENT2_RUNS",
    "EXPERIMENT2_PROBLEMS",
    "RBF_SANITY_PROBLEMS",
    "RBF_SANITY_GRID",
    "RBF_SANITY_RUNS",
]
