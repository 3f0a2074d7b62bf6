"""
Tests for fitting, prediction and tuning of the Monte Carlo classifier.
"""
import math

import numpy as np
import pytest

from gpcmc.core.errors import ContractError, DimensionFailureError, TunerError
from gpcmc.models.gpc import Ordering, Prediction, TuneStatus
from gpcmc.models.kernel import Dataset, KernelSpec
from gpcmc.models.orthant import EstimatorConfig, OrthantProblem
from gpcmc.services import gpc_service
from gpcmc.services.kernels import build_covariance
from gpcmc.services.oracles import dense_orthant, linear_kernel_posteriors_1d, soft_count_limit
from gpcmc.services.orthant_mc import estimate_log_orthant


class TestReorder:
    def test_interleave_alternates_classes(self):
        data = Dataset(np.arange(5.0), np.array([1, 1, 1, -1, -1]))
        ordered, signs = gpc_service.reorder(data, Ordering.INTERLEAVE)
        assert list(signs.permutation) == [0, 3, 1, 4, 2]
        assert list(ordered.labels) == [1, -1, 1, -1, 1]
        np.testing.assert_array_equal(signs.signs, ordered.labels)

    def test_shuffle_is_seeded(self, tiny_1d):
        _, a = gpc_service.reorder(tiny_1d, Ordering.SEEDED_SHUFFLE, seed=4)
        _, b = gpc_service.reorder(tiny_1d, Ordering.SEEDED_SHUFFLE, seed=4)
        np.testing.assert_array_equal(a.permutation, b.permutation)
        assert sorted(a.permutation) == list(range(tiny_1d.n))

    def test_as_given(self, tiny_1d):
        _, signs = gpc_service.reorder(tiny_1d, Ordering.AS_GIVEN)
        np.testing.assert_array_equal(signs.permutation, np.arange(tiny_1d.n))


def test_training_covariance_folds_in_labels():
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    R = gpc_service.training_covariance(sigma, np.array([1, -1], dtype=np.int8))
    np.testing.assert_allclose(R, [[3.0, -0.5], [-0.5, 2.0]])


class TestFitPredict:
    @pytest.fixture
    def fitted(self, tiny_1d):
        cfg = EstimatorConfig(samples_per_dim=100_000, seed=9)
        return gpc_service.fit(tiny_1d, KernelSpec.linear(), cfg)

    def test_log_marginal_matches_oracle(self, fitted, tiny_1d):
        _, exact = linear_kernel_posteriors_1d(tiny_1d.features[:, 0], tiny_1d.labels, [0.0])
        tolerance = 5.0 * math.sqrt(fitted.report.variance_estimate)
        assert abs(fitted.log_marginal - exact) <= tolerance

    def test_posteriors_match_oracle(self, fitted, tiny_1d):
        test = np.array([[-1.0], [0.0], [0.4], [1.5]])
        predictions = gpc_service.predict_many(fitted, gpc_service.bundle_for(fitted, test))
        exact, _ = linear_kernel_posteriors_1d(tiny_1d.features[:, 0], tiny_1d.labels, test[:, 0])
        estimated = np.array([p.posterior for p in predictions])
        np.testing.assert_allclose(estimated, exact, atol=0.02)
        assert [p.index for p in predictions] == [0, 1, 2, 3]

    def test_prediction_class_rule(self, fitted):
        predictions = gpc_service.predict_many(
            fitted, gpc_service.bundle_for(fitted, np.array([[-2.0], [2.0]]))
        )
        assert predictions[0].predicted_class == 1
        assert predictions[1].predicted_class == -1

    def test_model_keeps_training_state(self, fitted, tiny_1d):
        assert fitted.particles.size == 100_000
        assert fitted.particles.current_dim == tiny_1d.n
        np.testing.assert_allclose(fitted.q_final @ fitted.r_train, np.eye(tiny_1d.n), atol=1e-9)

    def test_bundle_must_come_from_model(self, fitted, tiny_1d):
        raw = build_covariance(KernelSpec.linear(), tiny_1d, np.array([[0.3]]))
        with pytest.raises(ContractError):
            gpc_service.predict(fitted, raw, 0)

    def test_test_index_out_of_range(self, fitted):
        bundle = gpc_service.bundle_for(fitted, np.array([[0.3]]))
        with pytest.raises(ContractError):
            gpc_service.predict(fitted, bundle, 1)

    def test_prediction_is_deterministic(self, fitted):
        bundle = gpc_service.bundle_for(fitted, np.linspace(-1, 2, 7)[:, None])
        one = gpc_service.predict_many(fitted, bundle, threads=1)
        three = gpc_service.predict_many(fitted, bundle, threads=3)
        assert one == three

    def test_fit_only(self, fitted):
        bundle = gpc_service.bundle_for(fitted, None)
        assert gpc_service.predict_many(fitted, bundle) == []

    def test_dimension_failure_raises(self, monkeypatch, tiny_1d):
        from gpcmc.services import orthant_mc

        real = orthant_mc.sequential_pass

        def starved(problem, samples, seed, replicate=0, purpose="orthant"):
            return real(problem, 1, seed, replicate, purpose)

        monkeypatch.setattr(gpc_service, "sequential_pass", starved)
        data = Dataset(np.linspace(-1, 1, 40), np.array([1, -1] * 20))
        with pytest.raises(DimensionFailureError, match="increase"):
            gpc_service.fit(data, KernelSpec.linear(), EstimatorConfig(samples_per_dim=100))


def _combined_error(prediction: Prediction, report) -> float:
    """Binomial error of the test draws plus the particle error carried from training."""
    return math.sqrt(prediction.std_error**2 + prediction.posterior**2 * report.variance_estimate)


class TestFitPredictCall:
    def test_single_pass_matches_fit_then_predict(self, tiny_1d):
        cfg = EstimatorConfig(samples_per_dim=20_000, seed=5)
        test = np.array([[0.0], [1.0]])
        result = gpc_service.fit_predict(tiny_1d, KernelSpec.linear(), cfg, test)
        model = gpc_service.fit(tiny_1d, KernelSpec.linear(), cfg)
        assert result.passes == 1
        assert result.log_marginal == model.log_marginal
        assert result.predictions == gpc_service.predict_many(model, gpc_service.bundle_for(model, test))

    def test_chunked_passes_pool_predictions(self, tiny_1d):
        cfg = EstimatorConfig(samples_per_dim=100_000, chunk_size=25_000, seed=9)
        test = np.array([[-1.0], [0.0], [0.4], [1.5]])
        result = gpc_service.fit_predict(tiny_1d, KernelSpec.linear(), cfg, test)
        exact, exact_log = linear_kernel_posteriors_1d(tiny_1d.features[:, 0], tiny_1d.labels, test[:, 0])
        single = gpc_service.fit(tiny_1d, KernelSpec.linear(), cfg.model_copy(update={"chunk_size": None}))
        assert result.passes == 4
        assert result.samples == 100_000
        assert all(p.posterior == p.accepted / 100_000 for p in result.predictions)
        np.testing.assert_allclose([p.posterior for p in result.predictions], exact, atol=0.02)
        assert abs(result.log_marginal - exact_log) <= 5.0 * math.sqrt(single.report.variance_estimate)

    def test_small_memory_budget_splits_into_passes(self, tiny_1d):
        cfg = EstimatorConfig(samples_per_dim=20_000, seed=2, memory_budget_mb=1)
        result = gpc_service.fit_predict(tiny_1d, KernelSpec.linear(), cfg, np.array([[0.2]]))
        passes, samples = cfg.pass_plan(tiny_1d.n)
        assert passes > 1
        assert result.passes == passes
        assert result.samples == passes * samples
        assert len(result.predictions) == 1


class TestInvariants:
    def test_log_marginal_is_the_training_orthant_estimate(self, tiny_2d):
        cfg = EstimatorConfig(samples_per_dim=5000, seed=31)
        model = gpc_service.fit(tiny_2d, KernelSpec.rbf(1.0, 2.0), cfg)
        report = estimate_log_orthant(OrthantProblem.positive(model.r_train), cfg)
        assert model.log_marginal == report.log_integral

    def test_posteriors_are_fractions_of_m(self, tiny_2d):
        m = 4000
        model = gpc_service.fit(tiny_2d, KernelSpec.rbf(1.0, 2.0), EstimatorConfig(samples_per_dim=m, seed=3))
        test = np.linspace(-2.0, 4.0, 12).reshape(6, 2)
        for p in gpc_service.predict_many(model, gpc_service.bundle_for(model, test)):
            assert 0.0 <= p.posterior <= 1.0
            assert p.posterior * m == pytest.approx(p.accepted)

    def test_label_flip_complements_posteriors(self, tiny_1d):
        flipped = Dataset(tiny_1d.features, -tiny_1d.labels)
        test = np.array([[-1.0], [0.4], [1.5]])
        model = gpc_service.fit(tiny_1d, KernelSpec.linear(), EstimatorConfig(samples_per_dim=100_000, seed=1))
        other = gpc_service.fit(flipped, KernelSpec.linear(), EstimatorConfig(samples_per_dim=100_000, seed=2))
        ours = gpc_service.predict_many(model, gpc_service.bundle_for(model, test))
        theirs = gpc_service.predict_many(other, gpc_service.bundle_for(other, test))
        for a, b in zip(ours, theirs):
            tolerance = 3.0 * math.hypot(_combined_error(a, model.report), _combined_error(b, other.report))
            assert abs(a.posterior + b.posterior - 1.0) <= tolerance

    def test_posterior_is_ratio_of_orthant_integrals(self):
        data = Dataset(np.array([[-0.5], [0.2], [0.9], [1.3], [0.4]]), np.array([1, 1, -1, -1, 1]))
        model = gpc_service.fit(data, KernelSpec.rbf(1.0, 2.0), EstimatorConfig(samples_per_dim=200_000, seed=8))
        bundle = gpc_service.bundle_for(model, np.array([[0.0], [1.0]]))
        denominator = dense_orthant(model.r_train)
        for t, prediction in enumerate(gpc_service.predict_many(model, bundle)):
            column = model.ordering.signs * bundle.cross[:, t]
            augmented = np.block(
                [[model.r_train, column[:, None]], [column[None, :], np.array([[1.0 + bundle.test_diag[t]]])]]
            )
            numerator = dense_orthant(augmented)
            ratio = numerator.probability / denominator.probability
            oracle_error = (numerator.abs_error + ratio * denominator.abs_error) / denominator.probability
            tolerance = 3.0 * _combined_error(prediction, model.report) + oracle_error
            assert abs(prediction.posterior - ratio) <= tolerance

    def test_interleaving_evens_out_acceptance(self):
        # both classes share one strong feature, so sorted order starves the second class
        x = np.full((10, 1), 3.0)
        data = Dataset(x, np.array([1] * 5 + [-1] * 5))
        cfg = EstimatorConfig(samples_per_dim=50_000, seed=4)

        def spread(ordering):
            p = np.asarray(gpc_service.fit(data, KernelSpec.linear(), cfg, ordering).per_dim_p)
            return float(np.sum((1.0 - p) / p))

        assert spread(Ordering.INTERLEAVE) < spread(Ordering.AS_GIVEN)


def test_prediction_model_enforces_class_rule():
    with pytest.raises(ValueError):
        Prediction(index=0, posterior=0.7, predicted_class=-1, test_cond_var=1.0, accepted=7, std_error=0.1)


class TestLimits:
    def test_vanishing_scale(self, tiny_2d):
        m = 100_000
        cfg = EstimatorConfig(samples_per_dim=m, seed=1)
        model = gpc_service.fit(tiny_2d, KernelSpec.rbf(1.0, 1e-10), cfg)
        n = tiny_2d.n
        assert abs(model.log_marginal + n * math.log(2.0)) <= 4.0 * math.sqrt(n / m)
        test = np.array([[0.0, 0.0], [2.0, 2.0], [5.0, -3.0]])
        predictions = gpc_service.predict_many(model, gpc_service.bundle_for(model, test))
        assert all(abs(p.posterior - 0.5) <= 0.02 for p in predictions)

    @pytest.mark.parametrize("alpha, beta", [(1e-8, 1.0), (1.0, 1e-8)])
    def test_degenerate_hyperparameters_give_coin_flip(self, tiny_2d, alpha, beta):
        model = gpc_service.fit(tiny_2d, KernelSpec.rbf(alpha, beta), EstimatorConfig(samples_per_dim=100_000, seed=6))
        test = np.array([[0.5, 0.5], [1.0, -1.0], [3.0, 2.5]])
        predictions = gpc_service.predict_many(model, gpc_service.bundle_for(model, test))
        assert all(abs(p.posterior - 0.5) <= 0.02 for p in predictions)

    def test_infinite_length_scale_counts_classes(self):
        x = np.array([[0.0], [0.3], [0.6], [0.9], [1.2], [1.5], [1.8]])
        y = np.array([1, 1, 1, 1, 1, -1, -1])
        data = Dataset(x, y)
        beta = 1.5
        model = gpc_service.fit(data, KernelSpec.rbf(1e6, beta), EstimatorConfig(samples_per_dim=200_000, seed=3))
        [prediction] = gpc_service.predict_many(model, gpc_service.bundle_for(model, np.array([[0.7]])))
        exact = soft_count_limit(5, 2, beta)
        assert abs(prediction.posterior - exact) <= 3.0 * _combined_error(prediction, model.report)


class TestTune:
    def test_ranked_by_log_marginal(self, tiny_2d):
        grid = [KernelSpec.rbf(1.0, 1e-10), KernelSpec.rbf(2.0, 2.0), KernelSpec.rbf(0.5, 1.0)]
        results = gpc_service.tune(tiny_2d, grid, EstimatorConfig(samples_per_dim=20_000, seed=2))
        assert len(results) == 3
        assert [r.rank for r in results] == [1, 2, 3]
        values = [r.log_marginal for r in results]
        assert values == sorted(values, reverse=True)
        vanishing = next(r for r in results if r.grid_index == 0)
        n, m = tiny_2d.n, 20_000
        assert abs(vanishing.log_marginal + n * math.log(2.0)) <= 4.0 * math.sqrt(n / m)

    def test_single_cell(self, tiny_2d):
        results = gpc_service.tune(tiny_2d, [KernelSpec.rbf(1.0, 1.0)], EstimatorConfig(samples_per_dim=1000))
        assert len(results) == 1
        assert results[0].status == TuneStatus.OK

    def test_failed_cells_rank_last(self, monkeypatch, tiny_2d):
        real_fit = gpc_service.fit

        def flaky(train, spec, cfg, ordering=Ordering.INTERLEAVE):
            if spec.alpha == 0.1:
                raise DimensionFailureError(3, cfg.samples_per_dim)
            return real_fit(train, spec, cfg, ordering)

        monkeypatch.setattr(gpc_service, "fit", flaky)
        grid = [KernelSpec.rbf(0.1, 1.0), KernelSpec.rbf(1.0, 1.0)]
        results = gpc_service.tune(tiny_2d, grid, EstimatorConfig(samples_per_dim=1000))
        assert results[0].grid_index == 1
        assert results[1].status == TuneStatus.FAILED
        assert results[1].log_marginal == -math.inf
        assert "dimension 3" in results[1].reason

    def test_all_cells_failing(self, monkeypatch, tiny_2d):
        def broken(train, spec, cfg, ordering=Ordering.INTERLEAVE):
            raise DimensionFailureError(0, cfg.samples_per_dim)

        monkeypatch.setattr(gpc_service, "fit", broken)
        with pytest.raises(TunerError):
            gpc_service.tune(tiny_2d, [KernelSpec.rbf(1.0, 1.0)], EstimatorConfig(samples_per_dim=1000))

    def test_empty_grid(self, tiny_2d):
        with pytest.raises(TunerError):
            gpc_service.tune(tiny_2d, [], EstimatorConfig(samples_per_dim=1000))
