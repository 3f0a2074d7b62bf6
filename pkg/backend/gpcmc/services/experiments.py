"""
Experiment service for gpcmc.

Reproduces the accuracy tables: rank-one orthant integrals against the
quadrature oracle, single-feature linear-kernel classification against the
exact posterior, and an RBF sanity run against the Bayes posterior.

Every job (problem or run, M) owns seeds derived from the experiment seed, and
the work queue returns results in submission order, so the tables do not
depend on the number of workers.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gpcmc.core import rng
from gpcmc.core.config import settings
from gpcmc.core.errors import GpcmcError, InvalidInputError
from gpcmc.models.experiment import (
    Metric,
    MetricReport,
    MultivariateProblemSpec,
    SyntheticProblemSpec,
)
from gpcmc.models.gpc import Ordering
from gpcmc.models.kernel import Dataset, KernelSpec
from gpcmc.models.oracle import RankOneCovarianceSpec
from gpcmc.models.orthant import EstimatorConfig, OrthantProblem
from gpcmc.services import gpc_service
from gpcmc.services.oracles import bayes_posterior, linear_kernel_posteriors_1d, orthant_rank_one
from gpcmc.services.orthant_mc import chunked_estimate

# Configure logging
logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17e"
TABLE_COLUMNS = [
    "problem", "n", "samples", "kernel", "metric", "value", "std_error", "runs", "failures",
]
TIMING_COLUMNS = ["problem", "n", "samples", "kernel", "metric", "seconds"]


@dataclass
class GeneratedData:
    train: Dataset
    test_features: np.ndarray
    test_labels: np.ndarray


def _class_sizes(n: int) -> Tuple[int, int]:
    first = math.ceil(n / 2)
    return first, n - first


def _labels(n: int) -> np.ndarray:
    first, second = _class_sizes(n)
    return np.concatenate((np.ones(first, dtype=np.int8), -np.ones(second, dtype=np.int8)))


def generate_synthetic(spec: SyntheticProblemSpec, seed: int, run: int = 0) -> GeneratedData:
    """Single-feature data; the first ceil(n/2) patterns of each set are class +1."""
    gen = rng.stream(seed, "data", spec.name, spec.seed, run)

    def draw(n: int) -> np.ndarray:
        first, second = _class_sizes(n)
        return np.concatenate(
            (
                gen.normal(spec.mean1, spec.std1, first),
                gen.normal(spec.mean2, spec.std2, second),
            )
        )[:, None]

    train = Dataset(draw(spec.n_train), _labels(spec.n_train))
    return GeneratedData(train, draw(spec.n_test), _labels(spec.n_test))


def generate_multivariate(spec: MultivariateProblemSpec, seed: int, run: int = 0) -> GeneratedData:
    gen = rng.stream(seed, "data", spec.name, spec.seed, run)

    def draw(n: int) -> np.ndarray:
        first, second = _class_sizes(n)
        return np.vstack(
            (
                gen.multivariate_normal(spec.mean1, spec.cov1, first),
                gen.multivariate_normal(spec.mean2, spec.cov2, second),
            )
        )

    train = Dataset(draw(spec.n_train), _labels(spec.n_train))
    return GeneratedData(train, draw(spec.n_test), _labels(spec.n_test))


def absolute_percentage_error(exact: float, estimate: float) -> float:
    return 100.0 * abs(exact - estimate) / abs(exact)


def _run_jobs(jobs: Sequence[Callable[[], object]], threads: Optional[int]) -> List[object]:
    """Run independent jobs; results come back in submission order."""
    workers = min(threads or settings.MAX_THREADS, max(len(jobs), 1))
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


@dataclass
class _Outcome:
    cell: tuple
    values: Dict[Metric, float]
    seconds: float
    failed: bool = False


def _collect(
    outcomes: List[_Outcome],
    metrics: Sequence[Metric],
    describe: Callable[[tuple], dict],
) -> Dict[Metric, List[MetricReport]]:
    """Group job outcomes by cell, keeping the first-seen cell order."""
    cells: Dict[tuple, List[_Outcome]] = {}
    for outcome in outcomes:
        cells.setdefault(outcome.cell, []).append(outcome)

    tables: Dict[Metric, List[MetricReport]] = {m: [] for m in metrics}
    for cell, group in cells.items():
        failures = sum(1 for o in group if o.failed)
        seconds = math.fsum(o.seconds for o in group)
        if failures:
            logger.warning("%d of %d runs failed in cell %s", failures, len(group), cell)
        for metric in metrics:
            values = [o.values[metric] for o in group if not o.failed]
            tables[metric].append(
                MetricReport.from_values(
                    metric, values, failures=failures, seconds=seconds, **describe(cell)
                )
            )
    return tables


def run_experiment1(
    dims: Sequence[int],
    m_values: Sequence[int],
    problems_per_cell: int,
    seed: int,
    threads: Optional[int] = None,
) -> List[MetricReport]:
    """
    Rank-one orthant integrals: for every (N, M) cell, MAPE of the estimated
    log integral against the quadrature oracle over random problems with
    d ~ U[-1, 1].
    """
    problems = {}
    for n in dims:
        for p in range(problems_per_cell):
            d = rng.stream(seed, "exp1-problem", n, p).uniform(-1.0, 1.0, n)
            spec = RankOneCovarianceSpec(d)
            problems[n, p] = (OrthantProblem.positive(spec.covariance()), orthant_rank_one(spec))
    logger.info("Prepared %d rank-one problems", len(problems))

    def job(n: int, m: int, p: int) -> Callable[[], _Outcome]:
        def run() -> _Outcome:
            problem, exact = problems[n, p]
            cfg = EstimatorConfig(
                samples_per_dim=m, seed=rng.derive_seed(seed, "exp1-run", n, m, p), threads=1
            )
            started = time.perf_counter()
            try:
                report = chunked_estimate(problem, cfg)
            except GpcmcError as exc:
                logger.warning("exp1 N=%d M=%d problem %d refused: %s", n, m, p, exc)
                return _Outcome((n, m), {}, time.perf_counter() - started, failed=True)
            seconds = time.perf_counter() - started
            if report.failed or report.failures:
                return _Outcome((n, m), {}, seconds, failed=True)
            return _Outcome(
                (n, m),
                {Metric.MAPE_LOG_INTEGRAL: absolute_percentage_error(exact, report.log_integral)},
                seconds,
            )
        return run

    jobs = [job(n, m, p) for n in dims for m in m_values for p in range(problems_per_cell)]
    outcomes = _run_jobs(jobs, threads)
    tables = _collect(
        outcomes,
        [Metric.MAPE_LOG_INTEGRAL],
        lambda cell: {"problem": f"rank-one-{cell[0]}", "n": cell[0], "samples": cell[1]},
    )
    for report in tables[Metric.MAPE_LOG_INTEGRAL]:
        logger.info(
            "exp1 N=%d M=%d: MAPE %.4g%% (%.2g) over %d problems, %.1fs",
            report.n, report.samples, report.value, report.std_error, report.runs, report.seconds,
        )
    return tables[Metric.MAPE_LOG_INTEGRAL]


def run_experiment2(
    problems: Sequence[SyntheticProblemSpec],
    m_values: Sequence[int],
    runs: int,
    seed: int,
    threads: Optional[int] = None,
) -> Tuple[List[MetricReport], List[MetricReport]]:
    """
    Single-feature linear-kernel classification against the exact posterior.

    Returns:
        (posterior MAE table, log marginal likelihood MAPE table)
    """
    kernel = KernelSpec.linear()
    prepared = {}
    for spec in problems:
        for r in range(runs):
            data = generate_synthetic(spec, seed, r)
            exact, log_l = linear_kernel_posteriors_1d(
                data.train.features[:, 0], data.train.labels, data.test_features[:, 0]
            )
            prepared[spec.name, r] = (data, exact, log_l)

    def job(spec: SyntheticProblemSpec, m: int, r: int) -> Callable[[], _Outcome]:
        def run() -> _Outcome:
            data, exact, log_l = prepared[spec.name, r]
            cfg = EstimatorConfig(
                samples_per_dim=m,
                seed=rng.derive_seed(seed, "exp2-run", spec.name, m, r),
                threads=1,
            )
            started = time.perf_counter()
            cell = (spec.name, spec.n_train, m)
            try:
                result = gpc_service.fit_predict(
                    data.train, kernel, cfg, data.test_features, Ordering.INTERLEAVE, threads=1
                )
            except GpcmcError as exc:
                logger.warning("exp2 %s M=%d run %d failed: %s", spec.name, m, r, exc)
                return _Outcome(cell, {}, time.perf_counter() - started, failed=True)
            posteriors = np.array([p.posterior for p in result.predictions])
            return _Outcome(
                cell,
                {
                    Metric.MAE_POSTERIOR: float(np.mean(np.abs(posteriors - exact))),
                    Metric.MAPE_LOG_MARGINAL: absolute_percentage_error(log_l, result.log_marginal),
                },
                time.perf_counter() - started,
            )
        return run

    jobs = [job(spec, m, r) for spec in problems for m in m_values for r in range(runs)]
    tables = _collect(
        _run_jobs(jobs, threads),
        [Metric.MAE_POSTERIOR, Metric.MAPE_LOG_MARGINAL],
        lambda cell: {"problem": cell[0], "n": cell[1], "samples": cell[2]},
    )
    for mae, mape in zip(tables[Metric.MAE_POSTERIOR], tables[Metric.MAPE_LOG_MARGINAL]):
        logger.info(
            "exp2 %s M=%d: MAE %.3g (%.2g), log L MAPE %.4g%% (%.2g), %.1fs",
            mae.problem, mae.samples, mae.value, mae.std_error, mape.value, mape.std_error,
            mae.seconds,
        )
    return tables[Metric.MAE_POSTERIOR], tables[Metric.MAPE_LOG_MARGINAL]


def rbf_sanity_run(
    problems: Sequence[MultivariateProblemSpec],
    grid: Sequence[KernelSpec],
    samples: int,
    runs: int,
    seed: int,
    threads: Optional[int] = None,
) -> List[MetricReport]:
    """
    RBF classification on two-dimensional Gaussian problems, compared with the
    Bayes posterior for every hyperparameter set. There is no exact GPC ground
    truth here; the table tracks accuracy and time per hyperparameter set.
    """
    prepared = {}
    for spec in problems:
        for r in range(runs):
            data = generate_multivariate(spec, seed, r)
            bayes = bayes_posterior(data.test_features, spec.mean1, spec.cov1, spec.mean2, spec.cov2)
            prepared[spec.name, r] = (data, bayes)

    def job(spec: MultivariateProblemSpec, g: int, r: int) -> Callable[[], _Outcome]:
        def run() -> _Outcome:
            data, bayes = prepared[spec.name, r]
            cfg = EstimatorConfig(
                samples_per_dim=samples,
                seed=rng.derive_seed(seed, "rbf-run", spec.name, g, r),
                threads=1,
            )
            started = time.perf_counter()
            cell = (spec.name, spec.n_train, g)
            try:
                result = gpc_service.fit_predict(
                    data.train, grid[g], cfg, data.test_features, Ordering.INTERLEAVE, threads=1
                )
            except GpcmcError as exc:
                logger.warning("rbf-sanity %s %s run %d failed: %s", spec.name, grid[g].label, r, exc)
                return _Outcome(cell, {}, time.perf_counter() - started, failed=True)
            posteriors = np.array([p.posterior for p in result.predictions])
            return _Outcome(
                cell,
                {Metric.MAE_BAYES_POSTERIOR: float(np.mean(np.abs(posteriors - bayes)))},
                time.perf_counter() - started,
            )
        return run

    jobs = [job(spec, g, r) for spec in problems for g in range(len(grid)) for r in range(runs)]
    tables = _collect(
        _run_jobs(jobs, threads),
        [Metric.MAE_BAYES_POSTERIOR],
        lambda cell: {
            "problem": cell[0], "n": cell[1], "samples": samples, "kernel": grid[cell[2]].label,
        },
    )
    for report in tables[Metric.MAE_BAYES_POSTERIOR]:
        logger.info(
            "rbf-sanity %s %s: MAE %.3g (%.2g), %.1fs",
            report.problem, report.kernel, report.value, report.std_error, report.seconds,
        )
    return tables[Metric.MAE_BAYES_POSTERIOR]


def reports_frame(reports: Sequence[MetricReport]) -> pd.DataFrame:
    rows = [r.model_dump(include=set(TABLE_COLUMNS)) for r in reports]
    frame = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    frame["metric"] = [r.metric.value for r in reports]
    return frame


def write_table(reports: Sequence[MetricReport], path: Path) -> Path:
    """
    Write the metric table, and the per-cell wall-clock times next to it as
    `<stem>_timing.csv`. The metric table is a pure function of the seed.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        reports_frame(reports).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        timing = pd.DataFrame(
            [
                {
                    "problem": r.problem,
                    "n": r.n,
                    "samples": r.samples,
                    "kernel": r.kernel,
                    "metric": r.metric.value,
                    "seconds": r.seconds,
                }
                for r in reports
            ],
            columns=TIMING_COLUMNS,
        )
        timing.to_csv(
            path.with_name(f"{path.stem}_timing.csv"), index=False, float_format=FLOAT_FORMAT
        )
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc}")
    logger.info("Wrote %d rows to %s", len(reports), path)
    return path


__all__ = [
    "GeneratedData",
    "generate_synthetic",
    "generate_multivariate",
    "absolute_percentage_error",
    "run_experiment1",
    "run_experiment2",
    "rbf_sanity_run",
    "reports_frame",
    "write_table",
    "FLOAT_FORMAT",
]
