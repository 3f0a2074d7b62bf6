"""
Ground-truth evaluators for gpcmc.

Exact one-dimensional reductions (rank-one orthant, single-feature linear
kernel classifier, the soft counting limit) evaluated by log-domain
quadrature, plus brute-force and dense evaluators for small dimensions.

Quadrature runs on [-10, 10] by default: outside it the Gaussian weight is
below 1e-22 while every cumulative-normal product is bounded by 1.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.special import log_ndtr, logsumexp, ndtr
from scipy.stats import multivariate_normal

from gpcmc.core import rng
from gpcmc.core.config import settings
from gpcmc.core.errors import DegenerateCovarianceError, InvalidInputError, OracleRefusedError
from gpcmc.models.oracle import (
    BruteForceResult,
    DenseResult,
    QuadratureConfig,
    QuadratureRule,
    RankOneCovarianceSpec,
)
from gpcmc.models.orthant import OrthantProblem, Region

# Configure logging
logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def quadrature_nodes(quad: Optional[QuadratureConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes u and log weights of the standard normal density times the rule weights."""
    quad = quad or QuadratureConfig()
    h = quad.half_width
    if quad.rule == QuadratureRule.TRAPEZOID:
        u = np.linspace(-h, h, quad.nodes)
        w = np.full(quad.nodes, u[1] - u[0])
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        x, w = leggauss(quad.nodes)
        u, w = h * x, h * w
    return u, np.log(w) - 0.5 * u**2 - LOG_SQRT_2PI


def _rank_one_slopes(spec: RankOneCovarianceSpec) -> np.ndarray:
    return spec.d / np.sqrt(1.0 - spec.d**2)


def orthant_rank_one(spec: RankOneCovarianceSpec, quad: Optional[QuadratureConfig] = None) -> float:
    """
    Log orthant probability of the rank-one covariance (unit diagonal, d_i d_j
    elsewhere), as E_u[prod_i Phi(d_i u / sqrt(1 - d_i^2))] with u ~ N(0, 1).
    """
    u, log_w = quadrature_nodes(quad)
    terms = log_ndtr(np.outer(_rank_one_slopes(spec), u)).sum(axis=0)
    return float(logsumexp(log_w + terms))


def successive_max_normalized_rank_one(
    spec: RankOneCovarianceSpec, quad: Optional[QuadratureConfig] = None
) -> float:
    """
    Same integral with the integrand built as a running product, rescaled by its
    maximum after every factor; the scales are multiplied back at the end.
    """
    u, log_w = quadrature_nodes(quad)
    values = np.ones_like(u)
    log_scale = 0.0
    for slope in _rank_one_slopes(spec):
        values *= ndtr(slope * u)
        peak = values.max()
        values /= peak
        log_scale += math.log(peak)
    return float(logsumexp(log_w, b=values)) + log_scale


def bivariate_orthant(rho: float) -> float:
    """P(v1 >= 0, v2 >= 0) for unit variances and correlation rho."""
    if not -1.0 <= rho <= 1.0:
        raise InvalidInputError(f"correlation {rho} outside [-1, 1]")
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


def linear_kernel_posteriors_1d(
    x_train: Sequence[float],
    y: Sequence[int],
    x_test: Sequence[float],
    quad: Optional[QuadratureConfig] = None,
) -> Tuple[np.ndarray, float]:
    """
    Exact class 1 posteriors for single-feature data under the linear kernel.

    Returns:
        (posteriors for every x_test, log marginal likelihood)
    """
    x_train = np.asarray(x_train, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    x_test = np.atleast_1d(np.asarray(x_test, dtype=np.float64)).ravel()
    if x_train.shape != y.shape:
        raise InvalidInputError("x_train and y differ in length")
    if not (np.all(np.isfinite(x_train)) and np.all(np.isfinite(x_test))):
        raise InvalidInputError("non-finite feature values")

    u, log_w = quadrature_nodes(quad)
    base = log_w + log_ndtr(np.outer(y * x_train, u)).sum(axis=0)
    log_den = float(logsumexp(base))
    log_num = logsumexp(base[None, :] + log_ndtr(np.outer(x_test, u)), axis=1)
    return np.exp(log_num - log_den), log_den


def linear_kernel_posterior_1d(
    x_train: Sequence[float],
    y: Sequence[int],
    x_test: float,
    quad: Optional[QuadratureConfig] = None,
) -> Tuple[float, float]:
    """(posterior J*, log marginal likelihood) for one test value."""
    posteriors, log_den = linear_kernel_posteriors_1d(x_train, y, [x_test], quad)
    return float(posteriors[0]), log_den


def soft_count_limit(
    n1: int, n2: int, beta: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """Posterior in the infinite length-scale limit: a smoothed vote of the class counts."""
    if n1 < 0 or n2 < 0:
        raise InvalidInputError("class counts must be non-negative")
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    u, log_w = quadrature_nodes(quad)
    s = math.sqrt(beta) * u
    base = log_w + n1 * log_ndtr(s) + n2 * log_ndtr(-s)
    return float(np.exp(logsumexp(base + log_ndtr(s)) - logsumexp(base)))


def _constrained_block(R: np.ndarray, region: Optional[Sequence[Region]]) -> np.ndarray:
    problem = OrthantProblem(R, region) if region is not None else OrthantProblem.positive(R)
    keep = np.flatnonzero(problem.constrained)
    return problem.covariance[np.ix_(keep, keep)]


def naive_mse(probability: float, samples: int) -> float:
    """Mean square error (1 - I) / (M I) of the log of a plain fraction-in-region estimate."""
    if not 0.0 < probability <= 1.0:
        return math.inf
    return (1.0 - probability) / (samples * probability)


def brute_force_orthant(
    R: np.ndarray,
    region: Optional[Sequence[Region]] = None,
    samples: Optional[int] = None,
    seed: int = 0,
    chunk: int = 1_000_000,
) -> BruteForceResult:
    """Fraction of joint draws from N(0, R) that land in the region."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] > settings.BRUTE_FORCE_MAX_DIM:
        raise OracleRefusedError(
            f"brute force is limited to {settings.BRUTE_FORCE_MAX_DIM} dimensions"
        )
    # free dimensions do not constrain the draw; integrate them out up front
    block = _constrained_block(R, region)
    try:
        lower = linalg.cholesky(block, lower=True)
    except linalg.LinAlgError:
        raise DegenerateCovarianceError("covariance is not positive definite")

    samples = samples or settings.BRUTE_FORCE_SAMPLES
    gen = rng.stream(seed, "brute-force")
    hits = 0
    remaining = samples
    while remaining:
        m = min(chunk, remaining)
        v = gen.standard_normal((m, block.shape[0])) @ lower.T
        hits += int(np.count_nonzero(np.all(v >= 0.0, axis=1)))
        remaining -= m

    p = hits / samples
    return BruteForceResult(
        probability=p,
        std_error=math.sqrt(p * (1.0 - p) / samples),
        samples=samples,
        relative_mse=naive_mse(p, samples),
    )


def dense_orthant(
    R: np.ndarray,
    region: Optional[Sequence[Region]] = None,
    abs_error: float = 1e-7,
) -> DenseResult:
    """
    Small-dimension orthant probability from the multivariate normal CDF at the
    origin. The CDF integrates by randomized quasi Monte Carlo, so repeated
    calls agree to about `abs_error`.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] > settings.BRUTE_FORCE_MAX_DIM:
        raise OracleRefusedError(
            f"dense evaluation is limited to {settings.BRUTE_FORCE_MAX_DIM} dimensions"
        )
    block = _constrained_block(R, region)
    k = block.shape[0]
    if k == 1:
        return DenseResult(probability=0.5, abs_error=0.0)
    # P(v >= 0) = P(v <= 0) for a zero-mean Gaussian
    try:
        probability = multivariate_normal.cdf(
            np.zeros(k),
            mean=np.zeros(k),
            cov=block,
            maxpts=1_000_000 * k,
            abseps=abs_error,
            releps=abs_error,
        )
    except (ValueError, np.linalg.LinAlgError):
        raise DegenerateCovarianceError("covariance is not positive definite")
    return DenseResult(probability=float(np.clip(probability, 0.0, 1.0)), abs_error=abs_error)


def bayes_posterior(
    x: np.ndarray,
    mean1: Sequence[float],
    cov1: np.ndarray,
    mean2: Sequence[float],
    cov2: np.ndarray,
) -> np.ndarray:
    """P(class 1 | x) for two Gaussian class-conditional densities with equal priors."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    log1 = multivariate_normal(mean=mean1, cov=cov1).logpdf(x)
    log2 = multivariate_normal(mean=mean2, cov=cov2).logpdf(x)
    return np.exp(np.atleast_1d(log1) - np.logaddexp(log1, log2))


__all__ = [
    "quadrature_nodes",
    "orthant_rank_one",
    "successive_max_normalized_rank_one",
    "bivariate_orthant",
    "linear_kernel_posteriors_1d",
    "linear_kernel_posterior_1d",
    "soft_count_limit",
    "naive_mse",
    "brute_force_orthant",
    "dense_orthant",
    "bayes_posterior",
]
