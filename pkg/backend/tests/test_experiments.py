"""
Tests for the experiment harness.
"""
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from gpcmc.core.config import settings
from gpcmc.core.errors import InvalidInputError
from gpcmc.models.experiment import (
    EXPERIMENT2_PROBLEMS,
    RBF_SANITY_GRID,
    RBF_SANITY_PROBLEMS,
    ExperimentScale,
    Metric,
    MetricReport,
    MultivariateProblemSpec,
    SyntheticProblemSpec,
)
from gpcmc.models.kernel import KernelSpec
from gpcmc.services import experiments, gpc_service

SMALL = SyntheticProblemSpec(name="small", n_train=12, n_test=6, mean1=0.0, mean2=1.0, std1=0.4, std2=0.5)


class TestMetricReport:
    def test_mean_and_standard_error(self):
        report = MetricReport.from_values(Metric.MAE_POSTERIOR, [1.0, 2.0, 3.0], problem="p", n=5, samples=100)
        assert report.value == pytest.approx(2.0)
        assert report.std_error == pytest.approx(1.0 / math.sqrt(3.0))
        assert report.runs == 3

    def test_single_run_has_zero_error(self):
        report = MetricReport.from_values(Metric.MAE_POSTERIOR, [0.4], problem="p", n=5, samples=100)
        assert report.std_error == 0.0

    def test_all_failed(self):
        report = MetricReport.from_values(Metric.MAE_POSTERIOR, [], failures=2, problem="p", n=5, samples=100)
        assert math.isnan(report.value)
        assert report.failures == 2

    def test_value_must_be_mean(self):
        with pytest.raises(ValidationError):
            MetricReport(
                metric=Metric.MAE_POSTERIOR, problem="p", n=1, samples=100,
                value=5.0, std_error=0.0, runs=2, per_run=[1.0, 2.0],
            )


class TestPresets:
    def test_problem_list(self):
        assert [p.n_train for p in EXPERIMENT2_PROBLEMS.values()] == [100, 200, 400, 800]
        assert EXPERIMENT2_PROBLEMS["problem-1"].std2 == 0.3

    def test_six_hyperparameter_sets(self):
        assert len(RBF_SANITY_GRID) == 6
        assert RBF_SANITY_GRID[3] == KernelSpec.rbf(0.5, 0.5)

    def test_desk_scale_is_smaller(self):
        desk, full = ExperimentScale.desk(), ExperimentScale.full()
        assert len(desk.m_values) < len(full.m_values)
        assert desk.dims == (50,)

    def test_rbf_problem_list(self):
        shapes = [(p.n_train, p.n_test, p.offset) for p in RBF_SANITY_PROBLEMS.values()]
        assert shapes == [
            (20, 50, 1.0), (50, 50, 1.0), (200, 200, 1.0), (50, 50, 0.5),
            (50, 50, 2.0), (50, 50, 1.0), (1000, 1000, 1.0),
        ]
        assert all(p.dim == 2 for name, p in RBF_SANITY_PROBLEMS.items() if name != "rbf-6")

    def test_ten_dimensional_problem(self):
        spec = RBF_SANITY_PROBLEMS["rbf-6"]
        assert spec.dim == 10
        np.testing.assert_allclose(np.diag(spec.cov2), 0.5)
        np.testing.assert_allclose(np.diag(spec.cov2, 1), 0.2)
        assert spec.mean2[-1] == 1.0 and not spec.mean2[:-1].any()
        data = experiments.generate_multivariate(spec, seed=0)
        assert data.train.features.shape == (50, 10)

    def test_indefinite_class_covariance_rejected(self):
        with pytest.raises(ValidationError):
            MultivariateProblemSpec(name="bad", n_train=4, n_test=2, offset=1.0, dim=3, rho=0.9, diag=0.5)

    def test_invalid_spread(self):
        with pytest.raises(ValidationError):
            SyntheticProblemSpec(name="x", n_train=4, n_test=2, mean1=0, mean2=1, std1=0.0, std2=1.0)


class TestGeneration:
    def test_first_half_is_class_one(self):
        data = experiments.generate_synthetic(SMALL.model_copy(update={"n_train": 7}), seed=1)
        assert list(data.train.labels) == [1, 1, 1, 1, -1, -1, -1]
        assert data.test_features.shape == (6, 1)

    def test_seeded(self):
        a = experiments.generate_synthetic(SMALL, seed=3, run=2)
        b = experiments.generate_synthetic(SMALL, seed=3, run=2)
        c = experiments.generate_synthetic(SMALL, seed=3, run=1)
        np.testing.assert_array_equal(a.train.features, b.train.features)
        assert not np.array_equal(a.train.features, c.train.features)

    def test_multivariate_shapes(self):
        spec = MultivariateProblemSpec(name="mv", n_train=9, n_test=4, offset=1.0)
        data = experiments.generate_multivariate(spec, seed=0)
        assert data.train.features.shape == (9, 2)
        assert data.test_features.shape == (4, 2)
        assert data.train.labels.sum() == 1


class TestRuns:
    def test_experiment1_cells(self):
        table = experiments.run_experiment1([5, 8], [1000, 4000], problems_per_cell=3, seed=0, threads=1)
        assert [(r.n, r.samples) for r in table] == [(5, 1000), (5, 4000), (8, 1000), (8, 4000)]
        assert all(r.metric == Metric.MAPE_LOG_INTEGRAL for r in table)
        assert all(r.value >= 0 and r.std_error >= 0 for r in table)
        assert all(r.runs + r.failures == 3 for r in table)

    def test_experiment1_independent_of_workers(self):
        one = experiments.run_experiment1([6], [1000], problems_per_cell=4, seed=5, threads=1)
        many = experiments.run_experiment1([6], [1000], problems_per_cell=4, seed=5, threads=4)
        assert [r.per_run for r in one] == [r.per_run for r in many]

    def test_experiment1_error_falls_with_samples(self):
        coarse, fine = experiments.run_experiment1([20], [1000, 100_000], problems_per_cell=10, seed=3, threads=2)
        assert fine.value < coarse.value

    def test_experiment1_splits_under_small_budget(self, monkeypatch):
        monkeypatch.setattr(settings, "MEMORY_BUDGET_MB", 1)
        [cell] = experiments.run_experiment1([100], [5000], problems_per_cell=2, seed=1, threads=1)
        assert cell.runs + cell.failures == 2
        assert cell.runs >= 1

    def test_refused_cell_is_recorded(self, monkeypatch):
        def refuse(problem, cfg):
            raise InvalidInputError("over the budget")

        monkeypatch.setattr(experiments, "chunked_estimate", refuse)
        [cell] = experiments.run_experiment1([4], [1000], problems_per_cell=3, seed=0, threads=1)
        assert cell.failures == 3
        assert cell.runs == 0
        assert math.isnan(cell.value)

    def test_experiment2_refused_run_is_recorded(self, monkeypatch):
        def refuse(*args, **kwargs):
            raise InvalidInputError("over the budget")

        monkeypatch.setattr(gpc_service, "fit_predict", refuse)
        mae, mape = experiments.run_experiment2([SMALL], [2000], runs=2, seed=1, threads=1)
        assert mae[0].failures == mape[0].failures == 2

    def test_experiment2_tables(self):
        mae, mape = experiments.run_experiment2([SMALL], [2000], runs=2, seed=1, threads=2)
        assert len(mae) == len(mape) == 1
        assert mae[0].metric == Metric.MAE_POSTERIOR
        assert mape[0].metric == Metric.MAPE_LOG_MARGINAL
        assert 0 <= mae[0].value < 0.2
        assert mape[0].runs == 2

    def test_indistinguishable_classes(self):
        same = SMALL.model_copy(update={"name": "same", "mean2": 0.0, "std2": 0.4})
        mae, mape = experiments.run_experiment2([same], [2000], runs=1, seed=2, threads=1)
        assert math.isfinite(mae[0].value)
        assert math.isfinite(mape[0].value)

    def test_rbf_sanity(self):
        spec = MultivariateProblemSpec(name="mv", n_train=10, n_test=8, offset=2.0)
        grid = [KernelSpec.rbf(3.0, 2.0), KernelSpec.rbf(0.5, 0.5)]
        table = experiments.rbf_sanity_run([spec], grid, samples=2000, runs=2, seed=0, threads=2)
        assert [r.kernel for r in table] == [g.label for g in grid]
        assert all(0 <= r.value <= 1 for r in table)


class TestTables:
    def test_csv_and_timing(self, tmp_path):
        reports = experiments.run_experiment1([4], [1000], problems_per_cell=2, seed=0, threads=1)
        path = experiments.write_table(reports, tmp_path / "exp1.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == experiments.TABLE_COLUMNS
        assert "e" in path.read_text().splitlines()[1]
        timing = pd.read_csv(tmp_path / "exp1_timing.csv")
        assert "seconds" in timing.columns

    def test_byte_identical_across_threads(self, tmp_path):
        one = experiments.run_experiment1([5], [1000], problems_per_cell=3, seed=9, threads=1)
        many = experiments.run_experiment1([5], [1000], problems_per_cell=3, seed=9, threads=3)
        a = experiments.write_table(one, tmp_path / "a.csv")
        b = experiments.write_table(many, tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()


@pytest.mark.slow
class TestAcceptance:
    def test_rank_one_desk_scale(self):
        [cell] = experiments.run_experiment1([50], [100_000], problems_per_cell=50, seed=0)
        assert cell.value <= 0.15

    def test_rank_one_high_dimension(self):
        [cell] = experiments.run_experiment1([500], [30_000], problems_per_cell=10, seed=0)
        assert cell.value <= 0.25

    def test_linear_problem_one(self):
        mae, mape = experiments.run_experiment2(
            [EXPERIMENT2_PROBLEMS["problem-1"]], [100_000], runs=20, seed=0
        )
        assert mae[0].value <= 0.003
        assert mape[0].value <= 0.20
