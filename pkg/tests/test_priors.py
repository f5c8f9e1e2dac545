import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from problin import (
    DenseOperator,
    ObservationBlock,
    PriorSpec,
    ScaledIdentity,
    covariance_class_WA,
    covariance_class_WH,
    precondition,
    prior_from_guess,
)
from problin.errors import InvalidSystemError, PreconditionError
from problin.priors import inverse_defect, scalar_mean_from_trace

from helpers import spd_matrix


def observations(A, k, seed=0):
    S = np.random.default_rng(seed).standard_normal((A.shape[0], k))
    return ObservationBlock(S, A @ S)


class TestPriorSpec:
    def test_defaults(self):
        p = PriorSpec()
        assert p.is_scalar and p.alpha == 1.0

    @pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"alpha": -1.0}, {"alpha": None}, {"alpha": "mean"}, {"phi": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(PreconditionError):
            PriorSpec(**kw)

    def test_explicit_pair_checked(self):
        A = spd_matrix(4)
        PriorSpec(H0=np.linalg.inv(A), A0=A)
        with pytest.raises(PreconditionError):
            PriorSpec(H0=np.eye(4), A0=A)

    def test_trace_option(self):
        assert PriorSpec(alpha="trace").alpha == "trace"


class TestScalarMean:
    def test_dense_is_exact(self):
        A = spd_matrix(6)
        assert scalar_mean_from_trace(A) == pytest.approx(np.trace(A) / 6)

    def test_matrix_free_estimate(self):
        from problin.linalg import FunctionOperator

        A = spd_matrix(40, condition=10.0)
        op = FunctionOperator(A.shape, lambda v: A @ v, symmetric=True)
        est = scalar_mean_from_trace(op, samples=200, seed=1)
        assert est == pytest.approx(np.trace(A) / 40, rel=0.1)


class TestCovarianceClass:
    def test_wa_dense_form(self):
        A = spd_matrix(7)
        obs = observations(A, 3)
        S, Y = obs.S, obs.Y
        P = np.eye(7) - S @ np.linalg.solve(S.T @ S, S.T)
        ref = Y @ np.linalg.solve(S.T @ Y, Y.T) + 0.5 * P
        W = covariance_class_WA(obs, 0.5)
        np.testing.assert_allclose(W.to_dense(), ref, atol=1e-12)
        np.testing.assert_allclose(W.apply(S), Y, atol=1e-12)

    def test_wh_dense_form(self):
        A = spd_matrix(7)
        obs = observations(A, 3)
        H0 = np.linalg.inv(spd_matrix(7, seed=3))
        Y = obs.Y
        P = np.eye(7) - Y @ np.linalg.solve(Y.T @ Y, Y.T)
        HY = H0 @ Y
        ref = HY @ np.linalg.solve(Y.T @ HY, HY.T) + 2.0 * P
        np.testing.assert_allclose(covariance_class_WH(obs, H0, 2.0).to_dense(), ref, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2, 12), data=st.data())
    def test_trace_closed_form(self, n, data):
        k = data.draw(st.integers(0, n))
        alpha = data.draw(st.floats(0.1, 10.0))
        psi = data.draw(st.floats(0.0, 5.0))
        A = spd_matrix(n, seed=n)
        obs = observations(A, k, seed=k) if k else ObservationBlock.empty(n)
        W = covariance_class_WH(obs, ScaledIdentity(n, 1.0 / alpha), psi)
        assert W.trace() == pytest.approx(k / alpha + psi * (n - k), rel=1e-12, abs=1e-12)
        assert np.trace(W.to_dense()) == pytest.approx(k / alpha + psi * (n - k), rel=1e-10, abs=1e-12)

    def test_positive_definite(self):
        A = spd_matrix(6)
        obs = observations(A, 2)
        assert np.linalg.eigvalsh(covariance_class_WA(obs, 1.0).to_dense()).min() > 0


class TestPriorFromGuess:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
    def test_guess_reproduced(self, seed, n):
        rng = np.random.default_rng(seed)
        b = rng.standard_normal(n)
        x0 = rng.standard_normal(n)
        H0, A0, x0_used = prior_from_guess(x0, b, alpha=0.1)
        np.testing.assert_allclose(H0.apply(b), x0_used, atol=1e-12 * np.linalg.norm(x0_used))
        Hd = H0.to_dense()
        assert np.linalg.eigvalsh(0.5 * (Hd + Hd.T)).min() > 0
        np.testing.assert_allclose(A0.to_dense() @ Hd, np.eye(n), atol=1e-10)

    def test_opposite_guess_negated(self):
        b = np.array([1.0, 0.0, 0.0])
        _, _, x0 = prior_from_guess(np.array([-2.0, 1.0, 0.0]), b, alpha=0.5)
        np.testing.assert_allclose(x0, [2.0, -1.0, 0.0])

    def test_orthogonal_guess(self):
        b = np.array([1.0, 0.0])
        with pytest.raises(PreconditionError):
            prior_from_guess(np.array([0.0, 1.0]), b, alpha=0.5)
        H0, _, x0 = prior_from_guess(np.array([0.0, 1.0]), b, alpha=0.5, bAb=2.0)
        np.testing.assert_allclose(x0, [0.5, 0.0])
        np.testing.assert_allclose(H0.apply(b), x0)

    def test_alpha_clamped(self):
        b = np.array([1.0, 1.0])
        x0 = np.array([1.0, 0.0])
        H0, _, _ = prior_from_guess(x0, b, alpha=5.0)
        np.testing.assert_allclose(H0.apply(b), x0, atol=1e-14)

    def test_zero_rhs(self):
        with pytest.raises(InvalidSystemError):
            prior_from_guess(np.ones(2), np.zeros(2), 1.0)


class TestPrecondition:
    def test_transformed_system(self):
        A = spd_matrix(5)
        b = np.arange(1.0, 6.0)
        Pinv = np.diag(1.0 / np.sqrt(np.diag(A)))
        sysp = precondition(Pinv, A, b)
        np.testing.assert_allclose(sysp.A.to_dense(), Pinv.T @ A @ Pinv, atol=1e-13)
        xp = np.linalg.solve(sysp.A.to_dense(), sysp.b)
        np.testing.assert_allclose(sysp.pullback(xp), np.linalg.solve(A, b), rtol=1e-10)

    def test_inverse_defect(self):
        A = spd_matrix(4)
        assert inverse_defect(DenseOperator(A), DenseOperator(np.linalg.inv(A))) < 1e-12
