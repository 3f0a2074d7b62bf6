"""
Orthant estimation models for gpcmc.

This module defines the integration problem, the estimator configuration,
the particle ensemble carried between dimensions and the estimate report.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from gpcmc.core.config import settings
from gpcmc.core.errors import InvalidInputError

# particle buffer plus its resampled copy, float64
BYTES_PER_POINT = 16
MIN_PASS_SAMPLES = 100


class Region(str, Enum):
    """Integration limits of one dimension"""
    HALF_LINE_POSITIVE = "+"
    FULL_LINE = "*"


def parse_region(spec: str, n: int) -> Tuple[Region, ...]:
    """Parse a compact region string such as '++*+'; an empty string means all '+'."""
    spec = spec.replace(",", "").strip()
    if not spec:
        return (Region.HALF_LINE_POSITIVE,) * n
    if len(spec) != n:
        raise InvalidInputError(f"region spec has {len(spec)} entries, covariance has {n}")
    try:
        return tuple(Region(ch) for ch in spec)
    except ValueError:
        raise InvalidInputError(f"region spec {spec!r} may only contain '+' and '*'")


@dataclass(frozen=True)
class OrthantProblem:
    """Zero-mean Gaussian with covariance R, integrated over `region`"""
    covariance: np.ndarray
    region: Tuple[Region, ...]

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=np.float64)
        n = cov.shape[0] if cov.ndim == 2 else -1
        if cov.ndim != 2 or cov.shape != (n, n) or n < 1:
            raise InvalidInputError("covariance must be a non-empty square matrix")
        if not np.all(np.isfinite(cov)):
            raise InvalidInputError("covariance contains non-finite values")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise InvalidInputError("covariance is not symmetric")
        region = tuple(Region(r) for r in self.region)
        if len(region) != n:
            raise InvalidInputError(f"region has {len(region)} entries, covariance has {n}")
        if Region.HALF_LINE_POSITIVE not in region:
            raise InvalidInputError("at least one dimension must be constrained to v >= 0")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "region", region)

    @classmethod
    def positive(cls, covariance: np.ndarray) -> "OrthantProblem":
        n = np.asarray(covariance).shape[0]
        return cls(covariance, (Region.HALF_LINE_POSITIVE,) * n)

    @property
    def n(self) -> int:
        return self.covariance.shape[0]

    @property
    def constrained(self) -> np.ndarray:
        return np.array([r == Region.HALF_LINE_POSITIVE for r in self.region])


class EstimatorConfig(BaseModel):
    """Monte Carlo settings for one estimate"""
    model_config = ConfigDict(frozen=True)

    samples_per_dim: int = Field(
        default_factory=lambda: settings.DEFAULT_SAMPLES,
        ge=100,
        description="Number M of points generated per dimension",
    )
    seed: int = Field(
        default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2**64, description="Root seed"
    )
    chunk_size: Optional[int] = Field(
        None,
        ge=MIN_PASS_SAMPLES,
        description="Largest M held in memory by one pass (default: settings.DEFAULT_CHUNK_SIZE)",
    )
    replicates: int = Field(1, ge=1, description="Independent passes to average")
    threads: Optional[int] = Field(None, ge=1, description="Worker cap (default: settings)")
    memory_budget_mb: int = Field(default_factory=lambda: settings.MEMORY_BUDGET_MB, ge=1)

    @property
    def effective_chunk(self) -> int:
        """Points held in memory by one pass; never more than M."""
        return min(self.chunk_size or settings.DEFAULT_CHUNK_SIZE, self.samples_per_dim)

    @property
    def workers(self) -> int:
        return self.threads or settings.MAX_THREADS

    def budget_samples(self, width: int) -> int:
        """Most points per dimension whose particle buffers fit the memory budget."""
        return self.memory_budget_mb * 2**20 // (width * BYTES_PER_POINT)

    def pass_plan(self, width: int) -> Tuple[int, int]:
        """
        Split M points per dimension into equal passes that respect both the
        chunk size and the memory budget.

        Returns:
            (passes per replicate, points per pass)
        """
        limit = max(min(self.effective_chunk, self.budget_samples(width)), 1)
        passes = math.ceil(self.samples_per_dim / limit)
        return passes, max(math.ceil(self.samples_per_dim / passes), MIN_PASS_SAMPLES)

    def check_memory(self, width: int, samples: Optional[int] = None) -> None:
        """Refuse passes whose particle buffers would not fit the memory budget."""
        samples = samples or self.effective_chunk
        needed = samples * width * BYTES_PER_POINT
        if needed > self.memory_budget_mb * 2**20:
            raise InvalidInputError(
                f"M={samples} x {width} dimensions needs about "
                f"{needed / 2**20:.0f} MB, over the {self.memory_budget_mb} MB budget; "
                "split the work into passes (chunked_estimate, fit_predict)"
            )


@dataclass(frozen=True)
class ParticleEnsemble:
    """M surviving sample strings v_{1:i}(m), one per row"""
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def current_dim(self) -> int:
        return self.values.shape[1]


class EstimateReport(BaseModel):
    """Result of one (or a combination of) sequential passes"""
    log_integral: float = Field(..., description="Log of the estimated orthant probability")
    per_dim_accept: List[float] = Field(..., description="Acceptance ratio per dimension")
    accepted_counts: List[int] = Field(..., description="Accepted points per dimension")
    samples: int = Field(..., ge=1, description="Points generated per dimension, all passes")
    bias_estimate: float = Field(..., description="Plug-in O(1/M) bias of the log estimate")
    variance_estimate: float = Field(..., description="Plug-in O(1/M) variance of the log estimate")
    failed_dim: Optional[int] = Field(None, description="First dimension with no accepted point")
    passes: int = Field(1, ge=1, description="Independent passes combined")
    failures: int = Field(0, ge=0, description="Passes that failed and were left out")
    pass_log_integrals: List[float] = Field(default_factory=list)
    std_error: Optional[float] = Field(
        None, description="Empirical standard error of the log estimate across passes"
    )
    empirical_variance: Optional[float] = Field(
        None, description="Sample variance of one pass's log estimate across passes"
    )

    @property
    def failed(self) -> bool:
        return self.failed_dim is not None

    @property
    def integral(self) -> float:
        return float(np.exp(self.log_integral))


def region_string(region: Sequence[Region]) -> str:
    return "".join(Region(r).value for r in region)


class OrthantRequest(BaseModel):
    """Request body for the orthant estimation endpoint"""
    covariance: List[List[float]] = Field(..., description="Symmetric positive definite matrix")
    region: str = Field("", description="'+' (v >= 0) or '*' (free) per dimension")
    samples: int = Field(100_000, ge=100, le=10_000_000)
    seed: int = Field(0, ge=0)
    replicates: int = Field(1, ge=1, le=1000)


class RankOneRequest(BaseModel):
    """Request body for the rank-one oracle endpoint"""
    d: List[float] = Field(..., min_length=1, description="Vector with |d_i| < 1")
    nodes: Optional[int] = Field(None, ge=3)
    half_width: Optional[float] = Field(None, ge=8.0)


__all__ = [
    "Region",
    "parse_region",
    "region_string",
    "BYTES_PER_POINT",
    "MIN_PASS_SAMPLES",
    "OrthantProblem",
    "EstimatorConfig",
    "ParticleEnsemble",
    "EstimateReport",
    "OrthantRequest",
    "RankOneRequest",
]
