"""
Tests for the conditional moment recursion and the partitioned-inverse identity.
"""
import numpy as np
import pytest

from gpcmc.core.errors import DegenerateCovarianceError
from gpcmc.models.kernel import CovarianceBundle
from gpcmc.services.gauss_linalg import (
    advance_moments,
    appendix_workspace,
    direct_moments,
    grow_inverse,
    initial_moments,
    schur_q,
    verify_appendix_identity,
)


def _bundle_from_joint(joint: np.ndarray) -> CovarianceBundle:
    """Split a joint (test first) covariance into bundle blocks."""
    return CovarianceBundle(
        sigma=np.ascontiguousarray(joint[1:, 1:]),
        cross=joint[1:, :1].copy(),
        test_block=joint[:1, :1].copy(),
    )


class TestRecursion:
    def test_first_step(self):
        R = np.array([[2.0, 0.5], [0.5, 1.0]])
        state = initial_moments(R)
        assert state.step == 1
        assert state.cond_var == 2.0
        assert state.b.size == 0

    def test_second_step_closed_form(self):
        R = np.array([[2.0, 0.5], [0.5, 1.0]])
        state = advance_moments(initial_moments(R), R)
        np.testing.assert_allclose(state.b, [0.25])
        np.testing.assert_allclose(state.cond_var, 1.0 - 0.125)

    def test_chain_matches_direct_solves(self, spd_factory, gen):
        for _ in range(100):
            n = int(gen.integers(2, 51))
            cond = 10.0 ** gen.uniform(0.0, 4.0)
            R = spd_factory(n, gen, cond)
            state = initial_moments(R)
            for i in range(2, n + 1):
                state = advance_moments(state, R)
                b, s2 = direct_moments(R, i)
                scale = max(1.0, float(np.linalg.norm(b)))
                assert np.linalg.norm(state.b - b) <= 1e-8 * scale
                assert abs(state.cond_var - s2) <= 1e-8 * R[i - 1, i - 1]

    @pytest.mark.slow
    def test_chain_matches_direct_solves_ill_conditioned(self, spd_factory, gen):
        for _ in range(100):
            n = int(gen.integers(2, 51))
            R = spd_factory(n, gen, 10.0 ** gen.uniform(0.0, 6.0))
            state = initial_moments(R)
            for i in range(2, n + 1):
                state = advance_moments(state, R)
                b, s2 = direct_moments(R, i)
                rel = np.linalg.norm(state.b - b) / max(1.0, float(np.linalg.norm(b)))
                assert rel <= 1e-8

    def test_identity_step_decouples(self):
        state = advance_moments(initial_moments(np.eye(4)), np.eye(4))
        np.testing.assert_array_equal(state.b, [0.0])
        assert state.cond_var == 1.0
        np.testing.assert_array_equal(grow_inverse(state), np.eye(2))

    @pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.5, 0.99])
    def test_bivariate_conditional(self, rho):
        R = np.array([[1.0, rho], [rho, 1.0]])
        state = advance_moments(initial_moments(R), R)
        np.testing.assert_allclose(state.b, [rho], rtol=1e-15)
        np.testing.assert_allclose(state.cond_var, 1.0 - rho**2, rtol=1e-12)

    def test_hand_solved_direct_moments(self):
        b, s2 = direct_moments(np.array([[2.0, 1.0], [1.0, 2.0]]), 2)
        np.testing.assert_allclose(b, [0.5])
        assert s2 == pytest.approx(1.5)

    def test_conditioning_never_adds_variance(self, spd_factory, gen):
        for _ in range(50):
            n = int(gen.integers(2, 31))
            R = spd_factory(n, gen, 10.0 ** gen.uniform(0.0, 4.0))
            state = initial_moments(R)
            assert state.cond_var <= R[0, 0] + 1e-12
            for i in range(1, n):
                state = advance_moments(state, R)
                assert state.cond_var <= R[i, i] + 1e-12

    def test_grown_inverse_is_inverse(self, spd_factory, gen):
        R = spd_factory(12, gen, 100.0)
        state = initial_moments(R)
        for _ in range(11):
            state = advance_moments(state, R)
        q = grow_inverse(state)
        np.testing.assert_allclose(q @ R, np.eye(12), atol=1e-10)
        assert np.array_equal(q, q.T)

    def test_singular_matrix_is_degenerate(self):
        v = np.array([1.0, 2.0, 3.0])
        R = np.outer(v, v)
        with pytest.raises(DegenerateCovarianceError) as err:
            advance_moments(initial_moments(R), R)
        assert err.value.step == 2

    def test_direct_moments_step_one(self, spd_factory, gen):
        R = spd_factory(4, gen)
        b, s2 = direct_moments(R, 1)
        assert b.size == 0
        assert s2 == R[0, 0]


class TestAppendixIdentity:
    def test_residual_is_small(self, spd_factory, gen):
        for _ in range(100):
            n = int(gen.integers(1, 31))
            joint = spd_factory(n + 1, gen, 10.0 ** gen.uniform(0.0, 3.0))
            labels = gen.choice([-1, 1], size=n)
            assert verify_appendix_identity(_bundle_from_joint(joint), labels) < 1e-8

    def test_single_training_pattern(self):
        joint = np.array([[1.0, 0.5], [0.5, 1.0]])
        assert verify_appendix_identity(_bundle_from_joint(joint), np.array([1])) < 1e-10

    def test_uncorrelated_test_pattern(self, spd_factory, gen):
        joint = spd_factory(7, gen, 20.0)
        joint[0, 1:] = 0.0
        joint[1:, 0] = 0.0
        bundle = _bundle_from_joint(joint)
        labels = gen.choice([-1, 1], size=6)
        ws = appendix_workspace(bundle, labels)
        np.testing.assert_allclose(ws.A[0, 1:], 0.0, atol=1e-14)
        assert np.all(ws.R[0, 1:] == 0.0)
        assert verify_appendix_identity(bundle, labels) < 1e-10

    def test_q_matches_schur_complement(self, spd_factory, gen):
        joint = spd_factory(9, gen, 50.0)
        bundle = _bundle_from_joint(joint)
        labels = gen.choice([-1, 1], size=8)
        ws = appendix_workspace(bundle, labels)
        np.testing.assert_allclose(ws.q, schur_q(bundle), rtol=1e-9)

    def test_a22_is_symmetric(self, spd_factory, gen):
        bundle = _bundle_from_joint(spd_factory(6, gen, 10.0))
        ws = appendix_workspace(bundle, np.ones(5))
        np.testing.assert_allclose(ws.a22, ws.a22.T, atol=1e-12)
