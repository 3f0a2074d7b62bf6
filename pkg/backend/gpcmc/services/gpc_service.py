"""
Gaussian process classification service for gpcmc.

Fitting runs the sequential orthant estimator over the training dimensions of
R = C'(I + Sigma)C'; the log marginal likelihood is the resulting log orthant
probability. The surviving particles and the final inverse Q_{N+1} are then
frozen, and each test pattern is one extra conditional dimension whose
acceptance fraction is its class 1 posterior.
"""
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gpcmc.core import rng
from gpcmc.core.config import settings
from gpcmc.core.errors import (
    ContractError,
    DegenerateCovarianceError,
    DimensionFailureError,
    GpcmcError,
    TunerError,
)
from gpcmc.models.gpc import (
    FitPredictResponse,
    GpcModel,
    LabelSigns,
    Ordering,
    Prediction,
    TuneResult,
    TuneStatus,
)
from gpcmc.models.kernel import CovarianceBundle, Dataset, KernelSpec
from gpcmc.models.orthant import EstimateReport, EstimatorConfig, OrthantProblem
from gpcmc.services.gauss_linalg import VARIANCE_FLOOR, grow_inverse
from gpcmc.services.kernels import build_covariance
from gpcmc.services.orthant_mc import combine_passes, sequential_pass

# Configure logging
logger = logging.getLogger(__name__)


def reorder(train: Dataset, mode: Ordering = Ordering.INTERLEAVE, seed: int = 0) -> Tuple[Dataset, LabelSigns]:
    """
    Put the training patterns in the order the estimator will visit them.

    Interleave alternates class +1 and class -1 patterns (class +1 first),
    appending the remainder of the larger class; SeededShuffle applies a
    seeded uniform permutation; AsGiven keeps the input order.
    """
    mode = Ordering(mode)
    n = train.n
    if mode == Ordering.INTERLEAVE:
        first = np.flatnonzero(train.labels == 1)
        second = np.flatnonzero(train.labels == -1)
        common = min(first.size, second.size)
        paired = np.empty(2 * common, dtype=np.int64)
        paired[0::2] = first[:common]
        paired[1::2] = second[:common]
        permutation = np.concatenate((paired, first[common:], second[common:]))
    elif mode == Ordering.SEEDED_SHUFFLE:
        permutation = rng.stream(seed, "reorder").permutation(n)
    else:
        permutation = np.arange(n)

    ordered = train.take(permutation)
    signs = LabelSigns(signs=ordered.labels.copy(), permutation=permutation, mode=mode)
    return ordered, signs


def training_covariance(sigma: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """C'(I + Sigma)C' for a diagonal sign matrix C'."""
    s = signs.astype(np.float64)
    return (np.eye(sigma.shape[0]) + sigma) * np.outer(s, s)


def _fingerprint(ordered: Dataset, signs: LabelSigns, kernel: KernelSpec) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(signs.permutation, dtype=np.int64).tobytes())
    digest.update(np.ascontiguousarray(signs.signs, dtype=np.int8).tobytes())
    digest.update(np.ascontiguousarray(ordered.features).tobytes())
    digest.update(kernel.model_dump_json().encode("utf-8"))
    return digest.hexdigest()


def fit(
    train: Dataset,
    spec: KernelSpec,
    cfg: EstimatorConfig,
    ordering: Ordering = Ordering.INTERLEAVE,
    replicate: int = 0,
) -> GpcModel:
    """
    Fit the classifier: one sequential pass over the training dimensions.

    Args:
        train: Labelled training set
        spec: Kernel and hyperparameters
        cfg: Estimator configuration; M and seed are used, replicates are not
        ordering: Training order applied before the covariance is built
        replicate: Pass index; selects the random streams

    Returns:
        The frozen model with particles, Q_{N+1} and the log marginal likelihood
    """
    started = time.perf_counter()
    ordered, signs = reorder(train, ordering, cfg.seed)
    bundle = build_covariance(spec, ordered)
    r_train = training_covariance(bundle.sigma, signs.signs)
    problem = OrthantProblem.positive(r_train)
    cfg.check_memory(problem.n, cfg.samples_per_dim)

    result = sequential_pass(problem, cfg.samples_per_dim, cfg.seed, replicate)
    report = result.report
    if report.failed:
        raise DimensionFailureError(report.failed_dim, cfg.samples_per_dim)

    model = GpcModel(
        train=ordered,
        kernel=spec,
        ordering=signs,
        r_train=r_train,
        q_final=grow_inverse(result.state),
        particles=result.particles,
        per_dim_p=np.asarray(report.per_dim_accept),
        log_marginal=report.log_integral,
        report=report,
        samples=cfg.samples_per_dim,
        seed=cfg.seed,
        fingerprint=_fingerprint(ordered, signs, spec),
        replicate=replicate,
    )
    logger.info(
        "Fitted %s on N=%d with M=%d: log L = %.6f (%.2fs)",
        spec.label, train.n, cfg.samples_per_dim, model.log_marginal,
        time.perf_counter() - started,
    )
    return model


def bundle_for(model: GpcModel, test_features: Optional[np.ndarray]) -> CovarianceBundle:
    """Covariance blocks against the model's ordered training set, stamped for predict."""
    bundle = build_covariance(model.kernel, model.train, test_features)
    return bundle.stamped(model.fingerprint)


def predict(model: GpcModel, bundle: CovarianceBundle, test_index: int) -> Prediction:
    """Posterior of one test pattern from the frozen training particles."""
    if bundle.fingerprint != model.fingerprint:
        raise ContractError(
            "covariance bundle was not built for this model's training order; "
            "use bundle_for(model, test_features)"
        )
    if not 0 <= test_index < bundle.n_test:
        raise ContractError(f"test index {test_index} outside 0..{bundle.n_test - 1}")

    column = model.ordering.signs * bundle.cross[:, test_index]
    r_tt = 1.0 + float(bundle.test_diag[test_index])
    b = model.q_final @ column
    cond_var = r_tt - float(column @ b)
    if not cond_var > VARIANCE_FLOOR * r_tt:
        raise DegenerateCovarianceError(
            f"test pattern {test_index} has conditional variance {cond_var:.3e}",
            step=model.n_train + test_index + 1,
        )

    gen = rng.stream(model.seed, "predict", model.replicate, test_index)
    draws = model.particles.values @ b + math.sqrt(cond_var) * gen.standard_normal(model.samples)
    accepted = int(np.count_nonzero(draws >= 0.0))
    posterior = accepted / model.samples
    return Prediction(
        index=test_index,
        posterior=posterior,
        predicted_class=1 if posterior >= 0.5 else -1,
        test_cond_var=cond_var,
        accepted=accepted,
        std_error=math.sqrt(posterior * (1.0 - posterior) / model.samples),
    )


def predict_many(
    model: GpcModel, bundle: CovarianceBundle, threads: Optional[int] = None
) -> List[Prediction]:
    """Predict every test column of `bundle`; results are in test index order."""
    indices = range(bundle.n_test)
    workers = min(threads or settings.MAX_THREADS, max(bundle.n_test, 1))
    if workers <= 1:
        return [predict(model, bundle, t) for t in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: predict(model, bundle, t), indices))


def _pooled(per_pass: List[List[Prediction]], samples: int) -> List[Prediction]:
    pooled = []
    total = samples * len(per_pass)
    for group in zip(*per_pass):
        accepted = sum(p.accepted for p in group)
        posterior = accepted / total
        pooled.append(
            Prediction(
                index=group[0].index,
                posterior=posterior,
                predicted_class=1 if posterior >= 0.5 else -1,
                test_cond_var=group[0].test_cond_var,
                accepted=accepted,
                std_error=math.sqrt(posterior * (1.0 - posterior) / total),
            )
        )
    return pooled


def fit_predict(
    train: Dataset,
    spec: KernelSpec,
    cfg: EstimatorConfig,
    test_features: Optional[np.ndarray] = None,
    ordering: Ordering = Ordering.INTERLEAVE,
    threads: Optional[int] = None,
) -> FitPredictResponse:
    """
    Fit and predict every test pattern in one call.

    When M points per dimension do not fit the chunk size or the memory
    budget, the work is split into equal independent passes. Each pass
    predicts the test patterns from its own particles before they are
    dropped; acceptance counts are pooled over passes and the log marginal
    likelihood is the log of the mean pass likelihood.
    """
    passes, samples = cfg.pass_plan(train.n)
    if passes == 1:
        model = fit(train, spec, cfg, ordering)
        predictions = predict_many(model, bundle_for(model, test_features), threads)
        return FitPredictResponse(
            log_marginal=model.log_marginal,
            n_train=model.n_train,
            samples=model.samples,
            passes=1,
            predictions=predictions,
        )

    logger.info("Splitting M=%d into %d passes of %d points", cfg.samples_per_dim, passes, samples)
    pass_cfg = cfg.model_copy(update={"samples_per_dim": samples, "chunk_size": samples})
    reports: List[EstimateReport] = []
    per_pass: List[List[Prediction]] = []
    bundle: Optional[CovarianceBundle] = None
    problem: Optional[OrthantProblem] = None
    for replicate in range(passes):
        model = fit(train, spec, pass_cfg, ordering, replicate=replicate)
        if bundle is None:
            bundle = bundle_for(model, test_features)
            problem = OrthantProblem.positive(model.r_train)
        reports.append(model.report)
        per_pass.append(predict_many(model, bundle, threads))
        del model

    combined = combine_passes(problem, reports, samples)
    return FitPredictResponse(
        log_marginal=combined.log_integral,
        n_train=train.n,
        samples=combined.samples,
        passes=passes,
        predictions=_pooled(per_pass, samples),
    )


def tune(
    train: Dataset,
    grid: Sequence[KernelSpec],
    cfg_small: EstimatorConfig,
    ordering: Ordering = Ordering.INTERLEAVE,
) -> List[TuneResult]:
    """
    Grid search on the log marginal likelihood.

    Cells are ranked by log L descending with ties broken by grid order;
    failed cells are ranked last, in grid order, with their failure reason.
    """
    if not grid:
        raise TunerError("hyperparameter grid is empty")

    def evaluate(item):
        index, spec = item
        started = time.perf_counter()
        try:
            model = fit(train, spec, cfg_small, ordering)
            return index, spec, model.log_marginal, None, time.perf_counter() - started
        except GpcmcError as exc:
            logger.warning("Tuning cell %d (%s) failed: %s", index, spec.label, exc)
            return index, spec, -math.inf, str(exc), time.perf_counter() - started

    workers = min(cfg_small.workers, len(grid))
    items = list(enumerate(grid))
    if workers <= 1:
        outcomes = [evaluate(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate, items))

    succeeded = sorted((o for o in outcomes if o[3] is None), key=lambda o: (-o[2], o[0]))
    failed = [o for o in outcomes if o[3] is not None]
    if not succeeded:
        raise TunerError(f"all {len(grid)} hyperparameter cells failed")

    results = []
    for rank, (index, spec, log_l, reason, seconds) in enumerate(succeeded + failed, start=1):
        results.append(
            TuneResult(
                rank=rank,
                grid_index=index,
                kernel=spec,
                log_marginal=log_l,
                status=TuneStatus.OK if reason is None else TuneStatus.FAILED,
                reason=reason,
                seconds=seconds,
            )
        )
    return results


__all__ = [
    "reorder",
    "training_covariance",
    "fit",
    "bundle_for",
    "predict",
    "predict_many",
    "fit_predict",
    "tune",
]
