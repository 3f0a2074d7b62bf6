"""
Orthant Monte Carlo service for gpcmc.

Estimates log P(v_i >= 0 for every constrained i) for v ~ N(0, R) with a
single sequential pass over the dimensions. At each dimension M points are
drawn from the conditional Gaussian given the surviving strings, the fraction
landing on the half-line is recorded, and the rejected strings are replaced
by bootstrap draws from the accepted ones. The log integral is the sum of the
log acceptance ratios.

Every (pass, dimension) pair owns its own counter-based random stream, so
results depend only on the seed, never on thread scheduling.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from gpcmc.core import rng
from gpcmc.core.errors import EmptyEnsembleError
from gpcmc.models.orthant import (
    EstimateReport,
    EstimatorConfig,
    OrthantProblem,
    ParticleEnsemble,
    Region,
)
from gpcmc.services.gauss_linalg import (
    ConditionalMomentsState,
    advance_moments,
    initial_moments,
)

# Configure logging
logger = logging.getLogger(__name__)


def bootstrap_indices(accepted_mask: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """
    Row order after replenishment: accepted rows in their original order,
    followed by uniform draws with replacement from the accepted rows.
    """
    kept = np.flatnonzero(accepted_mask)
    if kept.size == 0:
        raise EmptyEnsembleError("no accepted rows to resample from")
    missing = accepted_mask.size - kept.size
    if missing == 0:
        return kept
    return np.concatenate((kept, kept[gen.integers(0, kept.size, size=missing)]))


def resample(
    ensemble: ParticleEnsemble, accepted_mask: np.ndarray, gen: np.random.Generator
) -> ParticleEnsemble:
    """Replace rejected strings by draws from the accepted ones, keeping M rows."""
    accepted_mask = np.asarray(accepted_mask, dtype=bool)
    if accepted_mask.all():
        return ensemble
    return ParticleEnsemble(ensemble.values[bootstrap_indices(accepted_mask, gen)])


def log_integral_from_counts(counts: Sequence[int], samples: int) -> float:
    return math.fsum(math.log(c / samples) for c in counts)


def plug_in_diagnostics(p_hat: Sequence[float], samples: int):
    """Bias and variance of the log estimate with P_hat standing in for P."""
    terms = [(1.0 - p) / p for p in p_hat]
    return -math.fsum(terms) / (2.0 * samples), math.fsum(terms) / samples


@dataclass
class SequentialPass:
    """Everything one pass leaves behind; the classifier keeps the particles."""
    report: EstimateReport
    particles: Optional[ParticleEnsemble]
    state: Optional[ConditionalMomentsState]


def sequential_pass(
    problem: OrthantProblem,
    samples: int,
    seed: int,
    replicate: int = 0,
    purpose: str = "orthant",
) -> SequentialPass:
    """
    Run one pass of the sequential rejection and bootstrap estimator.

    Args:
        problem: Covariance and region
        samples: Number M of points per dimension
        seed: Root seed
        replicate: Pass index; selects the random streams
        purpose: Stream namespace, so that different callers never share streams

    Returns:
        SequentialPass with the report, the final particles and the last moments state
    """
    R = problem.covariance
    n = problem.n
    values = np.empty((samples, n))
    p_hat = np.full(n, np.nan)
    counts = np.zeros(n, dtype=np.int64)
    state: Optional[ConditionalMomentsState] = None

    for i in range(n):
        state = initial_moments(R) if state is None else advance_moments(state, R)
        gen = rng.stream(seed, purpose, replicate, i)
        draws = gen.standard_normal(samples) * math.sqrt(state.cond_var)
        if i:
            draws += values[:, :i] @ state.b
        values[:, i] = draws

        if problem.region[i] == Region.FULL_LINE:
            p_hat[i] = 1.0
            counts[i] = samples
            continue

        accepted = draws >= 0.0
        m1 = int(np.count_nonzero(accepted))
        counts[i] = m1
        p_hat[i] = m1 / samples
        logger.debug("dim %d: accepted %d of %d", i, m1, samples)
        if m1 == 0:
            logger.warning("No samples accepted at dimension %d (M=%d)", i, samples)
            report = EstimateReport(
                log_integral=-math.inf,
                per_dim_accept=p_hat.tolist(),
                accepted_counts=counts.tolist(),
                samples=samples,
                bias_estimate=math.nan,
                variance_estimate=math.nan,
                failed_dim=i,
            )
            return SequentialPass(report=report, particles=None, state=state)
        if m1 < samples:
            order = bootstrap_indices(accepted, gen)
            values[:, : i + 1] = values[order, : i + 1]

    constrained = problem.constrained
    bias, variance = plug_in_diagnostics(p_hat[constrained], samples)
    report = EstimateReport(
        log_integral=log_integral_from_counts(counts[constrained].tolist(), samples),
        per_dim_accept=p_hat.tolist(),
        accepted_counts=counts.tolist(),
        samples=samples,
        bias_estimate=bias,
        variance_estimate=variance,
    )
    return SequentialPass(report=report, particles=ParticleEnsemble(values), state=state)


def estimate_log_orthant(
    problem: OrthantProblem, cfg: EstimatorConfig, replicate: int = 0
) -> EstimateReport:
    """One full pass with M = cfg.samples_per_dim; failed dimensions come back flagged."""
    cfg.check_memory(problem.n, cfg.samples_per_dim)
    result = sequential_pass(problem, cfg.samples_per_dim, cfg.seed, replicate)
    return result.report


def combine_passes(
    problem: OrthantProblem, reports: List[EstimateReport], samples_per_pass: int
) -> EstimateReport:
    """Average equal-sized passes; failed passes are counted and left out."""
    ok = [r for r in reports if not r.failed]
    failures = len(reports) - len(ok)
    logs = [r.log_integral for r in reports]
    if not ok:
        first = reports[0]
        return first.model_copy(
            update={"passes": len(reports), "failures": failures, "pass_log_integrals": logs}
        )

    k = len(ok)
    ok_logs = np.array([r.log_integral for r in ok])
    # average in the probability domain
    combined = float(logsumexp(ok_logs) - math.log(k))
    p_hat = np.mean([r.per_dim_accept for r in ok], axis=0)
    counts = np.sum([r.accepted_counts for r in ok], axis=0)
    total = samples_per_pass * k
    bias, variance = plug_in_diagnostics(p_hat[problem.constrained], total)
    empirical = float(np.var(ok_logs, ddof=1)) if k > 1 else None
    return EstimateReport(
        log_integral=combined,
        per_dim_accept=p_hat.tolist(),
        accepted_counts=[int(c) for c in counts],
        samples=total,
        bias_estimate=bias,
        variance_estimate=variance,
        failed_dim=None,
        passes=len(reports),
        failures=failures,
        pass_log_integrals=logs,
        std_error=math.sqrt(empirical / k) if empirical is not None else None,
        empirical_variance=empirical,
    )


def chunked_estimate(problem: OrthantProblem, cfg: EstimatorConfig) -> EstimateReport:
    """
    Average several independent passes.

    Each replicate of M points is split into equal passes when M is over the
    chunk size or the memory budget, so memory stays bounded while the total
    number of points is preserved. A single pass is returned exactly as
    estimate_log_orthant would return it.
    """
    per_replicate, samples = cfg.pass_plan(problem.n)
    passes = cfg.replicates * per_replicate
    pass_cfg = cfg.model_copy(update={"samples_per_dim": samples, "chunk_size": samples})
    pass_cfg.check_memory(problem.n)

    if passes == 1:
        return estimate_log_orthant(problem, pass_cfg, replicate=0)

    def run(replicate: int) -> EstimateReport:
        return estimate_log_orthant(problem, pass_cfg, replicate=replicate)

    workers = min(cfg.workers, passes)
    logger.info(
        "Running %d passes of M=%d on %d dimensions with %d workers",
        passes, samples, problem.n, workers,
    )
    if workers == 1:
        reports = [run(r) for r in range(passes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, range(passes)))

    combined = combine_passes(problem, reports, samples)
    if combined.failures:
        logger.warning("%d of %d passes failed", combined.failures, passes)
    return combined


__all__ = [
    "bootstrap_indices",
    "resample",
    "sequential_pass",
    "SequentialPass",
    "estimate_log_orthant",
    "chunked_estimate",
    "combine_passes",
    "log_integral_from_counts",
    "plug_in_diagnostics",
]
