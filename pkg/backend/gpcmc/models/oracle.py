"""
Oracle models for gpcmc.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gpcmc.core.config import settings
from gpcmc.core.errors import InvalidInputError


class QuadratureRule(str, Enum):
    TRAPEZOID = "trapezoid"
    GAUSS_LEGENDRE = "gauss-legendre"


class QuadratureConfig(BaseModel):
    """One-dimensional quadrature over [-half_width, half_width] in u-units"""
    model_config = ConfigDict(frozen=True)

    nodes: int = Field(default_factory=lambda: settings.QUAD_NODES, ge=3)
    half_width: float = Field(default_factory=lambda: settings.QUAD_HALF_WIDTH, ge=8.0)
    rule: QuadratureRule = QuadratureRule.TRAPEZOID

    @model_validator(mode="after")
    def odd_trapezoid(self) -> "QuadratureConfig":
        if self.rule == QuadratureRule.TRAPEZOID and self.nodes % 2 == 0:
            raise ValueError("trapezoid rule needs an odd number of nodes")
        return self

    def refined(self) -> "QuadratureConfig":
        """Same rule with the grid spacing halved."""
        nodes = 2 * self.nodes - 1 if self.rule == QuadratureRule.TRAPEZOID else 2 * self.nodes
        return self.model_copy(update={"nodes": nodes})


@dataclass(frozen=True)
class RankOneCovarianceSpec:
    """Unit diagonal, d_i d_j off the diagonal"""
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64).ravel()
        if d.size < 1 or not np.all(np.isfinite(d)):
            raise InvalidInputError("d must be a non-empty finite vector")
        if np.any(np.abs(d) >= 1.0):
            raise InvalidInputError("every |d_i| must be below 1")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.size

    def covariance(self) -> np.ndarray:
        cov = np.outer(self.d, self.d)
        np.fill_diagonal(cov, 1.0)
        return cov


class BruteForceResult(BaseModel):
    """Plain fraction-in-region estimate"""
    probability: float = Field(..., ge=0.0, le=1.0)
    std_error: float = Field(..., ge=0.0)
    samples: int = Field(..., ge=1)
    relative_mse: float = Field(
        ..., description="(1 - I) / (M I): mean square error of the naive log estimate"
    )


class DenseResult(BaseModel):
    """Small-dimension orthant value from the multivariate normal CDF"""
    probability: float = Field(..., ge=0.0, le=1.0)
    abs_error: float = Field(..., ge=0.0, description="Requested absolute tolerance")


__all__ = [
    "QuadratureRule",
    "QuadratureConfig",
    "RankOneCovarianceSpec",
    "BruteForceResult",
    "DenseResult",
]
