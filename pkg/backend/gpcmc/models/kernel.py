"""
Kernel and data models for gpcmc.

This module defines the kernel specification, the labelled training set and
the bundle of covariance blocks built from them.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gpcmc.core.errors import InvalidInputError


class KernelFamily(str, Enum):
    """Supported covariance functions"""
    RBF = "rbf"
    LINEAR = "linear"


class KernelSpec(BaseModel):
    """Covariance function plus its hyperparameters"""
    model_config = ConfigDict(frozen=True)

    family: KernelFamily = Field(KernelFamily.RBF, description="Kernel family")
    alpha: Optional[float] = Field(
        None, gt=0, allow_inf_nan=False, description="Length scale (RBF only)"
    )
    beta: Optional[float] = Field(
        None, gt=0, allow_inf_nan=False, description="Latent function scale (RBF only)"
    )

    @model_validator(mode="after")
    def check_hyperparameters(self) -> "KernelSpec":
        if self.family == KernelFamily.RBF:
            if self.alpha is None or self.beta is None:
                raise ValueError("RBF kernel needs both alpha and beta")
        elif self.alpha is not None or self.beta is not None:
            raise ValueError("linear kernel takes no hyperparameters")
        return self

    @classmethod
    def rbf(cls, alpha: float, beta: float) -> "KernelSpec":
        return cls(family=KernelFamily.RBF, alpha=alpha, beta=beta)

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(family=KernelFamily.LINEAR)

    @property
    def label(self) -> str:
        if self.family == KernelFamily.LINEAR:
            return "linear"
        return f"rbf(alpha={self.alpha!r}, beta={self.beta!r})"


@dataclass(frozen=True)
class Dataset:
    """Training patterns as rows of `features` with labels in {-1, +1}"""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise InvalidInputError("features must be a non-empty N x d matrix")
        if labels.shape != (features.shape[0],):
            raise InvalidInputError(
                f"expected {features.shape[0]} labels, got shape {labels.shape}"
            )
        if not np.all(np.isfinite(features)):
            raise InvalidInputError("features contain non-finite values")
        bad = np.flatnonzero((labels != 1) & (labels != -1))
        if bad.size:
            raise InvalidInputError(
                f"label at row {int(bad[0]) + 1} is {labels[bad[0]]!r}; labels must be -1 or +1"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, order: np.ndarray) -> "Dataset":
        return Dataset(self.features[order], self.labels[order])


@dataclass(frozen=True)
class CovarianceBundle:
    """
    Covariance blocks for N training and T test patterns.

    sigma is N x N, cross is N x T (one column per test pattern) and
    test_block is T x T. `fingerprint` is stamped by the classifier so that a
    bundle can only be used with the model whose training order it matches.
    """
    sigma: np.ndarray
    cross: np.ndarray
    test_block: np.ndarray
    fingerprint: Optional[str] = None

    def __post_init__(self):
        n = self.sigma.shape[0]
        t = self.test_block.shape[0]
        if self.sigma.shape != (n, n):
            raise InvalidInputError("sigma must be square")
        if self.cross.shape != (n, t) or self.test_block.shape != (t, t):
            raise InvalidInputError(
                f"cross {self.cross.shape} and test block {self.test_block.shape} "
                f"do not match {n} training and {t} test patterns"
            )
        if np.max(np.abs(self.sigma - self.sigma.T), initial=0.0) > 1e-12:
            raise InvalidInputError("sigma is not symmetric")

    @property
    def n_train(self) -> int:
        return self.sigma.shape[0]

    @property
    def n_test(self) -> int:
        return self.test_block.shape[0]

    @property
    def test_diag(self) -> np.ndarray:
        """Prior variances of the test patterns (read-only view)."""
        return np.diagonal(self.test_block)

    def composite(self, test_index: int) -> np.ndarray:
        """Joint covariance of (test pattern, training patterns), test first."""
        n = self.n_train
        out = np.empty((n + 1, n + 1))
        out[0, 0] = self.test_block[test_index, test_index]
        out[0, 1:] = self.cross[:, test_index]
        out[1:, 0] = self.cross[:, test_index]
        out[1:, 1:] = self.sigma
        return out

    def stamped(self, fingerprint: str) -> "CovarianceBundle":
        return CovarianceBundle(self.sigma, self.cross, self.test_block, fingerprint)


__all__ = ["KernelFamily", "KernelSpec", "Dataset", "CovarianceBundle"]
