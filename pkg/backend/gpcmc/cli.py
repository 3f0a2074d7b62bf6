"""
Command-line interface for gpcmc.

Subcommands estimate orthant probabilities, fit and predict with the
classifier, rank hyperparameter grids and reproduce the accuracy tables.
Summaries go to stdout, logs to stderr and tables to CSV files.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
import argparse
import logging
import os
import sys
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from scipy import linalg

from gpcmc.core import rng
from gpcmc.core.config import settings
from gpcmc.core.errors import DimensionFailureError, GpcmcError, InvalidInputError
from gpcmc.core.log import configure_logging
from gpcmc.models.experiment import (
    EXPERIMENT2_PROBLEMS,
    RBF_SANITY_GRID,
    RBF_SANITY_PROBLEMS,
    ExperimentName,
    ExperimentScale,
)
from gpcmc.models.gpc import Ordering
from gpcmc.models.kernel import Dataset, KernelFamily, KernelSpec
from gpcmc.models.oracle import RankOneCovarianceSpec
from gpcmc.models.orthant import EstimatorConfig, OrthantProblem, parse_region, region_string
from gpcmc.services import experiments, gpc_service, oracles
from gpcmc.services.orthant_mc import chunked_estimate

# Configure logging
logger = logging.getLogger(__name__)

FLOAT_FORMAT = experiments.FLOAT_FORMAT


class OracleMode(str, Enum):
    """Reference value printed next to an orthant estimate"""
    NONE = "none"
    BRUTE_FORCE = "brute-force"
    DENSE = "dense"
    RANK_ONE = "rank-one"
    BIVARIATE = "bivariate"


class RunConfig(BaseModel):
    """Numeric flags shared by the subcommands, validated before any work starts"""
    model_config = ConfigDict(frozen=True)

    samples: int = Field(default_factory=lambda: settings.DEFAULT_SAMPLES, ge=100)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2**64)
    replicates: int = Field(1, ge=1)
    chunk_size: Optional[int] = Field(None, ge=100)
    threads: Optional[int] = Field(None, ge=1)
    alphas: List[float] = Field(default_factory=list)
    betas: List[float] = Field(default_factory=list)

    @field_validator("alphas", "betas")
    @classmethod
    def positive_hyperparameters(cls, v: List[float]) -> List[float]:
        if any(not (x > 0 and np.isfinite(x)) for x in v):
            raise ValueError("hyperparameters must be positive and finite")
        return v

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(
            samples_per_dim=self.samples,
            seed=self.seed,
            replicates=self.replicates,
            chunk_size=self.chunk_size,
            threads=self.threads,
        )


def _run_config(args: argparse.Namespace) -> RunConfig:
    fields = {}
    for name in RunConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    return RunConfig(**fields)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_matrix(path: Path) -> np.ndarray:
    """Whitespace or comma separated numbers, one matrix row per line."""
    try:
        frame = pd.read_csv(path, sep=r"[\s,]+", engine="python", header=None)
        matrix = frame.dropna(axis=1, how="all").to_numpy(dtype=np.float64)
    except FileNotFoundError:
        raise InvalidInputError(f"{path}: no such file")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InvalidInputError(f"{path}: cannot parse a numeric matrix ({exc})")
    if not np.all(np.isfinite(matrix)):
        raise InvalidInputError(f"{path}: matrix has missing or non-finite entries")
    return matrix


def write_matrix(matrix: np.ndarray, path: Path) -> None:
    pd.DataFrame(np.atleast_2d(matrix)).to_csv(
        path, sep=" ", header=False, index=False, float_format=FLOAT_FORMAT
    )


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        raise InvalidInputError(f"{path}: no such file")
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except (ValueError, pd.errors.ParserError) as exc:
        raise InvalidInputError(f"{path}: cannot parse CSV ({exc})")


def read_training_csv(path: Path) -> Dataset:
    """Feature columns followed by a final `label` column of -1/+1."""
    frame = _read_frame(path)
    if frame.shape[1] < 2 or frame.columns[-1].strip().lower() != "label":
        raise InvalidInputError(f"{path}: expected feature columns then a final 'label' column")
    try:
        features = frame.iloc[:, :-1].to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric feature value ({exc})")
    labels = pd.to_numeric(frame.iloc[:, -1], errors="coerce").to_numpy()
    bad = np.flatnonzero(~np.isin(labels, (-1, 1)))
    if bad.size:
        raise InvalidInputError(
            f"{path}: label at row {int(bad[0]) + 1} is {frame.iloc[bad[0], -1]!r}; "
            "labels must be -1 or +1"
        )
    return Dataset(features, labels.astype(np.int8))


def read_test_csv(path: Optional[Path], width: int) -> np.ndarray:
    if path is None:
        return np.empty((0, width))
    frame = _read_frame(path)
    if frame.empty:
        return np.empty((0, width))
    try:
        features = frame.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric feature value ({exc})")
    if features.shape[1] != width:
        raise InvalidInputError(
            f"{path}: {features.shape[1]} feature columns, training data has {width}"
        )
    return features


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _oracle_log_probability(args, problem: OrthantProblem, cfg: RunConfig) -> Optional[float]:
    mode = OracleMode(args.oracle)
    if mode == OracleMode.NONE:
        return None
    if mode == OracleMode.RANK_ONE:
        if args.rank_one_d is None:
            raise InvalidInputError("--oracle rank-one needs --rank-one-d (see make-rankone)")
        spec = RankOneCovarianceSpec(read_matrix(args.rank_one_d).ravel())
        if spec.n != problem.n:
            raise InvalidInputError(f"d has {spec.n} entries, covariance has {problem.n}")
        return oracles.orthant_rank_one(spec)
    if mode == OracleMode.BIVARIATE:
        if problem.n != 2 or not problem.constrained.all():
            raise InvalidInputError("--oracle bivariate needs a 2 x 2 positive orthant problem")
        cov = problem.covariance
        rho = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])
        return float(np.log(oracles.bivariate_orthant(float(rho))))
    if mode == OracleMode.DENSE:
        return float(np.log(oracles.dense_orthant(problem.covariance, problem.region).probability))
    result = oracles.brute_force_orthant(problem.covariance, problem.region, seed=cfg.seed)
    return float(np.log(result.probability)) if result.probability > 0 else -np.inf


def _require_positive_definite(matrix: np.ndarray, path: Path) -> None:
    try:
        linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        raise InvalidInputError(f"{path}: covariance is not positive definite")


def cmd_orthant(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    covariance = read_matrix(args.covariance_file)
    problem = OrthantProblem(covariance, parse_region(args.region, covariance.shape[0]))
    _require_positive_definite(problem.covariance, args.covariance_file)
    oracle = _oracle_log_probability(args, problem, cfg)
    report = chunked_estimate(problem, cfg.estimator())
    if report.failed:
        raise DimensionFailureError(report.failed_dim, report.samples)

    accept = np.asarray(report.per_dim_accept)[problem.constrained]
    print(f"log integral      {report.log_integral:.10f}")
    print(f"dimensions        {problem.n} ({int(problem.constrained.sum())} constrained)")
    print(f"samples per dim   {report.samples} over {report.passes} pass(es)")
    print(f"acceptance        min {accept.min():.4f}  mean {accept.mean():.4f}  max {accept.max():.4f}")
    print(f"bias estimate     {report.bias_estimate:.3e}")
    print(f"variance estimate {report.variance_estimate:.3e}")
    if report.std_error is not None:
        print(f"std error         {report.std_error:.3e} (across passes)")
    if report.failures:
        print(f"failed passes     {report.failures}")
    if oracle is not None:
        print(f"oracle ({args.oracle}) {oracle:.10f}  abs error {abs(oracle - report.log_integral):.3e}")

    if args.out:
        row = {
            "n": problem.n,
            "region": region_string(problem.region),
            "samples": report.samples,
            "passes": report.passes,
            "failures": report.failures,
            "log_integral": report.log_integral,
            "bias_estimate": report.bias_estimate,
            "variance_estimate": report.variance_estimate,
        }
        if oracle is not None:
            row["oracle_log_integral"] = oracle
            row["abs_error"] = abs(oracle - report.log_integral)
        _write_csv(pd.DataFrame([row]), Path(args.out))
    return 0


def cmd_make_rankone(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise InvalidInputError("n must be at least 1")
    d = rng.stream(args.seed, "make-rankone", args.n).uniform(-1.0, 1.0, args.n)
    spec = RankOneCovarianceSpec(d)
    out = Path(args.out)
    d_out = Path(args.d_out) if args.d_out else out.with_name(f"{out.stem}.d.txt")
    try:
        write_matrix(spec.covariance(), out)
        write_matrix(spec.d[None, :], d_out)
    except OSError as exc:
        raise InvalidInputError(f"cannot write {out}: {exc}")
    print(f"wrote {args.n} x {args.n} rank-one covariance to {out}")
    print(f"wrote d vector to {d_out}")
    print(f"exact log integral {oracles.orthant_rank_one(spec):.10f}")
    return 0


def _kernel(args: argparse.Namespace) -> KernelSpec:
    try:
        if args.kernel == KernelFamily.LINEAR.value:
            return KernelSpec.linear()
        return KernelSpec.rbf(args.alpha, args.beta)
    except ValidationError as exc:
        raise InvalidInputError(f"invalid kernel: {exc.errors()[0]['msg']}")


def cmd_fit_predict(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    kernel = _kernel(args)
    train = read_training_csv(args.train_csv)
    test = read_test_csv(args.test_csv, train.d)
    if args.oracle and (kernel.family != KernelFamily.LINEAR or train.d != 1):
        raise InvalidInputError("--oracle needs --kernel linear and a single feature column")

    result = gpc_service.fit_predict(
        train, kernel, cfg.estimator(), test, Ordering(args.ordering), threads=cfg.threads
    )
    predictions = result.predictions
    frame = pd.DataFrame(
        {
            "index": [p.index for p in predictions],
            "posterior": [p.posterior for p in predictions],
            "predicted_class": [p.predicted_class for p in predictions],
        },
        columns=["index", "posterior", "predicted_class"],
    )
    print(f"log marginal likelihood {result.log_marginal:.10f}")
    print(f"training patterns       {result.n_train}, test patterns {len(predictions)}")
    if result.passes > 1:
        print(f"samples per dim         {result.samples} over {result.passes} passes")

    if args.oracle:
        exact, log_l = oracles.linear_kernel_posteriors_1d(
            train.features[:, 0], train.labels, test[:, 0]
        )
        frame["oracle_posterior"] = exact
        print(f"oracle log marginal     {log_l:.10f}")
        if len(predictions):
            mae = float(np.mean(np.abs(frame["posterior"].to_numpy() - exact)))
            print(f"oracle posterior MAE    {mae:.3e}")

    if args.out:
        _write_csv(frame, Path(args.out))
    return 0


def _grid(args: argparse.Namespace, cfg: RunConfig) -> List[KernelSpec]:
    if args.preset_grid:
        return list(RBF_SANITY_GRID)
    if not cfg.alphas or not cfg.betas:
        raise InvalidInputError("give --alpha and --beta lists, or --preset-grid")
    return [KernelSpec.rbf(a, b) for a in cfg.alphas for b in cfg.betas]


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    grid = _grid(args, cfg)
    train = read_training_csv(args.train_csv)
    results = gpc_service.tune(train, grid, cfg.estimator(), Ordering(args.ordering))

    frame = pd.DataFrame(
        [
            {
                "rank": r.rank,
                "grid_index": r.grid_index,
                "alpha": r.kernel.alpha,
                "beta": r.kernel.beta,
                "log_marginal": r.log_marginal,
                "status": r.status.value,
                "reason": r.reason or "",
            }
            for r in results
        ]
    )
    for r in results:
        if r.reason is not None:
            print(f"cell {r.grid_index} ({r.kernel.label}) failed: {r.reason}", file=sys.stderr)
    best = results[0]
    print(f"best {best.kernel.label}: log L = {best.log_marginal:.10f}")
    if args.out:
        _write_csv(frame, Path(args.out))
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    scale = ExperimentScale.desk() if args.desk_scale else ExperimentScale.full()
    overrides = {}
    if args.m_values:
        overrides["m_values"] = tuple(args.m_values)
    if args.problems_per_cell is not None:
        overrides["problems_per_cell"] = args.problems_per_cell
    if args.runs is not None:
        overrides["runs"] = args.runs
        overrides["sanity_runs"] = args.runs
    try:
        scale = scale.model_copy(update=overrides)
        scale = ExperimentScale.model_validate(scale.model_dump())
    except ValidationError as exc:
        raise InvalidInputError(f"invalid experiment scale: {exc.errors()[0]['msg']}")
    if any(m < 100 for m in scale.m_values):
        raise InvalidInputError("every M must be at least 100")

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"cannot create {out_dir}: {exc}")
    if not os.access(out_dir, os.W_OK):
        raise InvalidInputError(f"{out_dir} is not writable")
    name = ExperimentName(args.name)
    if name == ExperimentName.EXP1:
        table = experiments.run_experiment1(
            scale.dims, scale.m_values, scale.problems_per_cell, cfg.seed, cfg.threads
        )
        written = [experiments.write_table(table, out_dir / "exp1_mape_log_integral.csv")]
    elif name == ExperimentName.EXP2:
        problems = [EXPERIMENT2_PROBLEMS[p] for p in scale.problems]
        mae, mape = experiments.run_experiment2(
            problems, scale.m_values, scale.runs, cfg.seed, cfg.threads
        )
        written = [
            experiments.write_table(mae, out_dir / "exp2_mae_posterior.csv"),
            experiments.write_table(mape, out_dir / "exp2_mape_log_marginal.csv"),
        ]
        table = mae + mape
    else:
        problems = [RBF_SANITY_PROBLEMS[p] for p in scale.sanity_problems]
        table = experiments.rbf_sanity_run(
            problems, RBF_SANITY_GRID, scale.sanity_samples, scale.sanity_runs, cfg.seed, cfg.threads
        )
        written = [experiments.write_table(table, out_dir / "rbf_sanity_mae_bayes.csv")]

    for report in table:
        label = f" {report.kernel}" if report.kernel else ""
        print(
            f"{report.metric.value:<20} {report.problem:<14} M={report.samples:<8}{label} "
            f"{report.value:.4g} ({report.std_error:.2g}) runs={report.runs} failures={report.failures}"
        )
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Root seed (default: settings)")
    parser.add_argument("--threads", type=int, default=None, help="Worker cap (default: all cores)")


def _add_estimator(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--samples", "-M", type=int, default=None, help="Points per dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpcmc",
        description="Gaussian process classification by sequential Monte Carlo orthant estimation.",
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default: settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orthant", help="Estimate a log orthant probability")
    p.add_argument("covariance_file", type=Path, help="Matrix file, one row per line")
    p.add_argument("--region", default="", help="'+' (v >= 0) or '*' (free) per dimension")
    p.add_argument("--replicates", type=int, default=None, help="Independent passes to average")
    p.add_argument("--chunk-size", type=int, default=None, help="Largest M held by one pass")
    p.add_argument("--oracle", choices=[m.value for m in OracleMode], default=OracleMode.NONE.value)
    p.add_argument("--rank-one-d", type=Path, default=None, help="d vector for --oracle rank-one")
    p.add_argument("--out", default=None, help="Summary CSV")
    _add_estimator(p)
    _add_common(p)
    p.set_defaults(handler=cmd_orthant)

    p = sub.add_parser("make-rankone", help="Write a random rank-one structured covariance")
    p.add_argument("n", type=int, help="Dimension")
    p.add_argument("out", help="Covariance file")
    p.add_argument("--d-out", default=None, help="d vector file (default: <out stem>.d.txt)")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.set_defaults(handler=cmd_make_rankone)

    for name, handler, help_text in (
        ("fit-predict", cmd_fit_predict, "Fit a classifier and predict test patterns"),
        ("tune", cmd_tune, "Rank an (alpha, beta) grid by log marginal likelihood"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("train_csv", type=Path, help="Features then a final 'label' column")
        p.add_argument(
            "--ordering", choices=[o.value for o in Ordering], default=Ordering.INTERLEAVE.value
        )
        p.add_argument("--out", default=None, help="Output CSV")
        _add_estimator(p)
        _add_common(p)
        p.set_defaults(handler=handler)
        if name == "fit-predict":
            p.add_argument("test_csv", type=Path, nargs="?", default=None, help="Test features")
            p.add_argument(
                "--kernel", choices=[k.value for k in KernelFamily], default=KernelFamily.RBF.value
            )
            p.add_argument("--alpha", type=float, default=1.0, help="RBF length scale")
            p.add_argument("--beta", type=float, default=1.0, help="RBF latent function scale")
            p.add_argument(
                "--oracle", action="store_true", help="Compare with the exact single-feature posterior"
            )
            p.add_argument("--chunk-size", type=int, default=None, help="Largest M held by one pass")
        else:
            p.add_argument("--alpha", dest="alphas", type=float, nargs="+", default=None)
            p.add_argument("--beta", dest="betas", type=float, nargs="+", default=None)
            p.add_argument(
                "--preset-grid", action="store_true", help="Use the six standard (alpha, beta) sets"
            )

    p = sub.add_parser("experiment", help="Reproduce an accuracy table")
    p.add_argument("name", choices=[e.value for e in ExperimentName])
    p.add_argument("--out-dir", default="results", help="Directory for the CSV tables")
    p.add_argument("--desk-scale", action="store_true", help="Reduced cell counts and M list")
    p.add_argument("--m-values", type=int, nargs="+", default=None, help="Override the M list")
    p.add_argument("--problems-per-cell", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GpcmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
