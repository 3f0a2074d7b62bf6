"""
Conditional Gaussian moments for gpcmc.

For a zero-mean Gaussian with covariance R the conditional law of v_i given
v_{1:i-1} is N(b_i^T v_{1:i-1}, sigma_i^2) with

    b_i       = R[1:i-1, 1:i-1]^{-1} R[1:i-1, i]
    sigma_i^2 = R[i, i] - R[1:i-1, i]^T b_i

`advance_moments` walks i -> i+1 with the partitioned-inverse update of
Q_i = R[1:i-1, 1:i-1]^{-1}, costing O(i^2) per step. `direct_moments`
refactorizes from scratch and serves as the oracle for the recursion.
Indices in this module's public API are 1-based, matching the step count.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from gpcmc.core.errors import DegenerateCovarianceError, InvalidInputError
from gpcmc.models.kernel import CovarianceBundle

# Configure logging
logger = logging.getLogger(__name__)

# sigma_i^2 below this fraction of R_ii is treated as degenerate
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ConditionalMomentsState:
    """Moments for drawing v_i given v_{1:i-1}"""
    step: int
    q_inv: np.ndarray
    b: np.ndarray
    cond_var: float


def _check_variance(cond_var: float, r_ii: float, step: int) -> None:
    if not cond_var > VARIANCE_FLOOR * r_ii:
        raise DegenerateCovarianceError(
            f"conditional variance {cond_var:.3e} is not above {VARIANCE_FLOOR:g} * R_ii",
            step=step,
        )


def initial_moments(R: np.ndarray) -> ConditionalMomentsState:
    """State for step 1: nothing to condition on, variance R_11."""
    r11 = float(R[0, 0])
    _check_variance(r11, abs(r11), 1)
    return ConditionalMomentsState(
        step=1, q_inv=np.empty((0, 0)), b=np.empty(0), cond_var=r11
    )


def grow_inverse(state: ConditionalMomentsState) -> np.ndarray:
    """Q_{i+1} from Q_i, b_i and sigma_i^2 by the partitioned-inverse block formula."""
    i = state.step
    s2 = state.cond_var
    b = state.b
    q = np.empty((i, i))
    q[: i - 1, : i - 1] = state.q_inv + np.outer(b, b) / s2
    q[: i - 1, i - 1] = -b / s2
    q[i - 1, : i - 1] = -b / s2
    q[i - 1, i - 1] = 1.0 / s2
    return 0.5 * (q + q.T)


def advance_moments(state: ConditionalMomentsState, R: np.ndarray) -> ConditionalMomentsState:
    """Advance the conditional moments from step i to step i+1."""
    i = state.step
    if R.shape[0] < i + 1:
        raise InvalidInputError(f"cannot advance to step {i + 1} of a {R.shape[0]}-dim covariance")
    q_next = grow_inverse(state)
    col = R[:i, i]
    b_next = q_next @ col
    r_ii = float(R[i, i])
    cond_var = r_ii - float(col @ b_next)
    _check_variance(cond_var, r_ii, i + 1)
    return ConditionalMomentsState(step=i + 1, q_inv=q_next, b=b_next, cond_var=cond_var)


def direct_moments(R: np.ndarray, i: int):
    """
    Conditional moments at step i by a fresh Cholesky solve.

    Returns:
        (b_i, sigma_i^2)
    """
    n = R.shape[0]
    if not 1 <= i <= n:
        raise InvalidInputError(f"step {i} outside 1..{n}")
    if i == 1:
        return np.empty(0), float(R[0, 0])
    lead = R[: i - 1, : i - 1]
    col = R[: i - 1, i - 1]
    try:
        factor = linalg.cho_factor(lead, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise DegenerateCovarianceError("leading submatrix is not positive definite", step=i)
    b = linalg.cho_solve(factor, col, check_finite=False)
    return b, float(R[i - 1, i - 1] - col @ b)


@dataclass(frozen=True)
class AppendixWorkspace:
    """
    Intermediate quantities of the partitioned-inverse identity A = R^{-1}.

    Ordering is (test pattern, training patterns); a12 = diag(1, C') and
    a22 = I + Sigma'^{-1} written in terms of a and sigma_star_sq.
    """
    a: np.ndarray
    sigma_star_sq: float
    a12: np.ndarray
    a22: np.ndarray
    A: np.ndarray
    R: np.ndarray

    @property
    def q(self) -> float:
        return 1.0 / float(self.A[0, 0])


def appendix_workspace(
    bundle: CovarianceBundle, labels: np.ndarray, test_index: int = 0
) -> AppendixWorkspace:
    """Build A = I - A12 A22^{-1} A12 and R = I + A12 Sigma' A12 for one test pattern."""
    sigma = bundle.sigma
    n = bundle.n_train
    signs = np.asarray(labels, dtype=np.float64)
    if signs.shape != (n,):
        raise InvalidInputError(f"expected {n} label signs, got shape {signs.shape}")
    cross = bundle.cross[:, test_index]
    s_tt = float(bundle.test_block[test_index, test_index])

    try:
        factor = linalg.cho_factor(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise DegenerateCovarianceError("training covariance is singular")
    a = linalg.cho_solve(factor, cross, check_finite=False)
    sigma_star_sq = s_tt - float(cross @ a)
    if not sigma_star_sq > VARIANCE_FLOOR * max(abs(s_tt), 1.0):
        raise DegenerateCovarianceError("test pattern has no variance left given training set")
    sigma_inv = linalg.cho_solve(factor, np.eye(n), check_finite=False)

    a12 = np.diag(np.concatenate(([1.0], signs)))
    a22 = np.empty((n + 1, n + 1))
    a22[0, 0] = 1.0 + 1.0 / sigma_star_sq
    a22[0, 1:] = -a / sigma_star_sq
    a22[1:, 0] = -a / sigma_star_sq
    a22[1:, 1:] = np.eye(n) + sigma_inv + np.outer(a, a) / sigma_star_sq

    A = np.eye(n + 1) - a12 @ linalg.solve(a22, a12, assume_a="sym")
    R = np.eye(n + 1) + a12 @ bundle.composite(test_index) @ a12
    return AppendixWorkspace(a=a, sigma_star_sq=sigma_star_sq, a12=a12, a22=a22, A=A, R=R)


def verify_appendix_identity(
    bundle: CovarianceBundle, labels: np.ndarray, test_index: int = 0
) -> float:
    """Max absolute entry of A R - I; zero up to rounding when the identity holds."""
    ws = appendix_workspace(bundle, labels, test_index)
    residual = float(np.max(np.abs(ws.A @ ws.R - np.eye(ws.R.shape[0]))))
    logger.debug("Appendix identity residual %.3e for N=%d", residual, bundle.n_train)
    return residual


def schur_q(bundle: CovarianceBundle, test_index: int = 0) -> float:
    """1 + Sigma_{x*x*} - Sigma_{Xx*}^T (I + Sigma)^{-1} Sigma_{Xx*}, solved directly."""
    cross = bundle.cross[:, test_index]
    shifted = np.eye(bundle.n_train) + bundle.sigma
    return 1.0 + float(bundle.test_block[test_index, test_index]) - float(
        cross @ linalg.solve(shifted, cross, assume_a="pos")
    )


__all__ = [
    "ConditionalMomentsState",
    "AppendixWorkspace",
    "initial_moments",
    "grow_inverse",
    "advance_moments",
    "direct_moments",
    "appendix_workspace",
    "verify_appendix_identity",
    "schur_q",
    "VARIANCE_FLOOR",
]
