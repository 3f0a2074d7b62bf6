"""
Kernel service for gpcmc.

Builds the training covariance, the train/test cross block and the test
block from feature data and a kernel specification. No jitter is added here:
regularization enters later as the identity term of the estimator covariance.
"""
import logging
from typing import Optional

import numpy as np

from gpcmc.core.errors import InvalidInputError
from gpcmc.models.kernel import CovarianceBundle, Dataset, KernelFamily, KernelSpec

# Configure logging
logger = logging.getLogger(__name__)


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances summed from explicit differences."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _pairwise(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.family == KernelFamily.LINEAR:
        return a @ b.T
    return spec.beta * np.exp(-squared_distances(a, b) / spec.alpha**2)


def _symmetric(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Kernel matrix of x with itself; upper triangle computed, then mirrored."""
    n = x.shape[0]
    rows, cols = np.triu_indices(n)
    if spec.family == KernelFamily.LINEAR:
        upper = np.einsum("ij,ij->i", x[rows], x[cols])
    else:
        diff = x[rows] - x[cols]
        upper = spec.beta * np.exp(-np.einsum("ij,ij->i", diff, diff) / spec.alpha**2)
    out = np.empty((n, n))
    out[rows, cols] = upper
    out[cols, rows] = upper
    return out


def kernel_matrix(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    return _symmetric(spec, np.atleast_2d(np.asarray(x, dtype=np.float64)))


def build_covariance(
    spec: KernelSpec,
    train: Dataset,
    test_features: Optional[np.ndarray] = None,
) -> CovarianceBundle:
    """
    Build the covariance blocks for a training set and optional test patterns.

    Args:
        spec: Kernel family and hyperparameters
        train: Training set (only its features are used)
        test_features: T x d matrix of test patterns; None or empty for T = 0

    Returns:
        CovarianceBundle with sigma (N x N), cross (N x T) and test_block (T x T)
    """
    x = train.features
    if test_features is None:
        test = np.empty((0, train.d))
    else:
        test = np.asarray(test_features, dtype=np.float64)
        if test.ndim == 1:
            test = test.reshape(-1, train.d) if test.size else np.empty((0, train.d))
    if test.ndim != 2 or test.shape[1] != train.d:
        raise InvalidInputError(
            f"test features have {test.shape[-1]} columns, training features have {train.d}"
        )
    if not np.all(np.isfinite(test)):
        raise InvalidInputError("test features contain non-finite values")

    with np.errstate(over="ignore", invalid="ignore"):
        sigma = _symmetric(spec, x)
        cross = _pairwise(spec, x, test)
        test_block = _symmetric(spec, test) if test.shape[0] else np.empty((0, 0))

    for name, block in (("sigma", sigma), ("cross", cross), ("test", test_block)):
        if not np.all(np.isfinite(block)):
            raise InvalidInputError(f"{name} covariance block overflowed for {spec.label}")

    logger.debug(
        "Built %s covariance for %d training and %d test patterns",
        spec.label, train.n, test.shape[0],
    )
    return CovarianceBundle(sigma=sigma, cross=cross, test_block=test_block)


__all__ = ["build_covariance", "kernel_matrix", "squared_distances"]
