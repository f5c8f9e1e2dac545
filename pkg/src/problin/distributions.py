"""Gaussian beliefs over matrices and over the solution vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import DefinitenessError, ShapeError
from .linalg import (
    LinearOperator,
    LowRankUpdate,
    OrthogonalProjection,
    ScaledOperator,
    aslinearoperator,
    smat,
    svec,
)


@dataclass(frozen=True)
class MatrixNormal:
    """Matrix-variate normal with covariance ``V ⊗ W`` in vec(X^T) coordinates."""

    mean: LinearOperator
    row_cov: LinearOperator
    col_cov: LinearOperator

    def __post_init__(self):
        for name in ("mean", "row_cov", "col_cov"):
            object.__setattr__(self, name, aslinearoperator(getattr(self, name)))
        n, m = self.mean.shape
        if self.row_cov.shape != (n, n) or self.col_cov.shape != (m, m):
            raise ShapeError("covariance factors do not match the mean")


@dataclass(frozen=True)
class SymmetricMatrixNormal:
    """Symmetric matrix-variate normal ``N(X0, W ⊗s W)``.

    ``mean_cholesky`` optionally carries a dense lower Cholesky factor of the
    mean, kept current by :func:`problin.inference.update_one`.
    """

    mean: LinearOperator
    cov_factor: LinearOperator
    mean_cholesky: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", aslinearoperator(self.mean))
        object.__setattr__(self, "cov_factor", aslinearoperator(self.cov_factor))
        if self.mean.shape != self.cov_factor.shape or self.mean.shape[0] != self.mean.shape[1]:
            raise ShapeError("mean and covariance factor must be square and equally sized")

    @property
    def n(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class GaussianVector:
    mean: np.ndarray
    cov: LinearOperator
    trace_cov: float

    def std(self):
        return np.sqrt(np.maximum(self.cov.diagonal(), 0.0))

    def sample(self, seed, count=1):
        """Draw ``count`` samples as rows, using a symmetric square root of the covariance."""
        C = self.cov.to_dense(max_dim=4096)
        lam, U = np.linalg.eigh(0.5 * (C + C.T))
        root = U * np.sqrt(np.clip(lam, 0.0, None))
        z = np.random.default_rng(seed).standard_normal((count, self.mean.size))
        return self.mean + z @ root.T


def _psd_factor(W):
    """Pivoted Cholesky ``W = L L^T`` with rank truncation at 1e-12 tr(W)."""
    W = 0.5 * (W + W.T)
    n = W.shape[0]
    tr = np.trace(W)
    if tr < 0 or np.min(np.diag(W)) < -1e-12 * max(abs(tr), 1e-300):
        raise DefinitenessError("covariance factor has a negative diagonal")
    if tr == 0.0:
        return np.zeros((n, 0))
    c, piv, rank, info = lapack.dpstrf(W, lower=1, tol=1e-12 * tr)
    if info < 0:
        raise DefinitenessError("pivoted Cholesky failed")
    L = np.tril(c)[:, :rank]
    P = np.zeros_like(L)
    P[piv - 1] = L
    resid = np.linalg.norm(P @ P.T - W)
    if resid > 1e-8 * max(np.linalg.norm(W), 1e-300):
        raise DefinitenessError("covariance factor is indefinite")
    return P


def sample_symmetric(belief, seed, count):
    """Draw ``count`` exactly symmetric samples from a symmetric matrix normal."""
    X0 = belief.mean.to_dense()
    X0 = 0.5 * (X0 + X0.T)
    L = _psd_factor(belief.cov_factor.to_dense())
    r = L.shape[1]
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        M = X0 + L @ smat(rng.standard_normal(r * (r + 1) // 2)) @ L.T if r else X0.copy()
        out.append(0.5 * (M + M.T))
    return out


def solution_belief(H_belief, b):
    """Belief over ``x = H b`` induced by a symmetric belief over H."""
    b = np.asarray(b, dtype=float)
    if b.shape != (H_belief.n,):
        raise ShapeError("right-hand side does not match the belief dimension")
    W = H_belief.cov_factor
    Wb = W.apply(b)
    if isinstance(W, ScaledOperator) and isinstance(W.op, OrthogonalProjection):
        # b^T P b cancels badly when b is nearly inside the explored space
        Pb = W.op.apply(b)
        bWb = W.c * float(Pb @ Pb)
    else:
        bWb = float(b @ Wb)
    cov = LowRankUpdate(ScaledOperator(W, 0.5 * bWb), Wb[:, None], 0.5 * Wb[:, None], symmetric=True)
    trace = 0.5 * (bWb * W.trace() + float(Wb @ Wb))
    return GaussianVector(H_belief.mean.apply(b), cov, max(trace, 0.0))


def logpdf_symmetric(belief, X):
    """Log-density of a symmetric matrix in svec coordinates."""
    W = belief.cov_factor.to_dense()
    W = 0.5 * (W + W.T)
    try:
        C = np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("covariance factor is singular") from exc
    D = np.asarray(X, dtype=float) - belief.mean.to_dense()
    svec(D)  # symmetry check
    n = W.shape[0]
    WiD = np.linalg.solve(C.T, np.linalg.solve(C, D))
    quad = float(np.sum(WiD * WiD.T))
    logdet = (n + 1) * 2.0 * np.sum(np.log(np.diag(C)))
    m = n * (n + 1) // 2
    return -0.5 * quad - 0.5 * logdet - 0.5 * m * np.log(2 * np.pi)
