"""Closed-form conditioning of matrix-variate normal beliefs on A S = Y."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .distributions import MatrixNormal, SymmetricMatrixNormal
from .errors import (
    BreakdownError,
    DegenerateActionError,
    GramSingularError,
    PreconditionError,
    ShapeError,
)
from .linalg import (
    LowRankUpdate,
    cholesky_rank1,
    rank2_as_two_rank1,
    symmetry_defect,
)

GRAM_RCOND = 1e-12


@dataclass(frozen=True)
class ObservationBlock:
    """Actions ``S`` and observations ``Y = A S``, stored column-wise."""

    S: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if S.ndim != 2 or Y.ndim != 2 or S.shape[1] != Y.shape[1]:
            raise ShapeError(f"action block {S.shape} and observation block {Y.shape} disagree")
        if S.shape[1] > S.shape[0]:
            raise ShapeError("more actions than unknowns")
        if S.shape[1] and np.any(np.linalg.norm(S, axis=0) == 0.0):
            raise DegenerateActionError("an action column is zero")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Y", Y)

    @property
    def k(self):
        return self.S.shape[1]

    @property
    def n(self):
        return self.S.shape[0]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)), np.zeros((n, 0)))

    def swapped(self):
        """Roles of actions and observations exchanged, as used by the inverse view."""
        return ObservationBlock(self.Y, self.S)

    def head(self, i):
        return ObservationBlock(self.S[:, :i], self.Y[:, :i])


def _gram_solve(G, rhs):
    """Solve with a symmetric positive definite Gram matrix, without jitter."""
    G = 0.5 * (G + G.T)
    try:
        c = scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GramSingularError("observation Gram matrix is not positive definite") from exc
    d = np.diag(c[0]) ** 2
    if d.min() <= GRAM_RCOND * d.max():
        raise GramSingularError("observation Gram matrix is numerically singular")
    return scipy.linalg.cho_solve(c, rhs)


def posterior_asymmetric(prior, obs):
    """Condition ``N(A0, V0 ⊗ W0)`` on ``A S = Y``."""
    if obs.k == 0:
        return prior
    A0, W0 = prior.mean, prior.col_cov
    if A0.shape != (obs.Y.shape[0], obs.S.shape[0]):
        raise ShapeError("observation block does not match the prior mean")
    W0S = W0.apply(obs.S)
    U = _gram_solve(obs.S.T @ W0S, W0S.T).T
    delta = obs.Y - A0.apply(obs.S)
    mean = LowRankUpdate(A0, delta, U)
    col = LowRankUpdate(W0, W0S, -U, symmetric=True)
    return MatrixNormal(mean, prior.row_cov, col)


def _check_symmetric_mean(belief):
    if not belief.mean.symmetric and symmetry_defect(belief.mean) > 1e-10:
        raise PreconditionError("prior mean is not symmetric")


def _symmetric_block(belief, S, Y):
    _check_symmetric_mean(belief)
    X0, W0 = belief.mean, belief.cov_factor
    WS = W0.apply(S)
    U = _gram_solve(S.T @ WS, WS.T).T
    delta = Y - X0.apply(S)
    M = S.T @ delta
    M = 0.5 * (M + M.T)
    mean = LowRankUpdate(X0, np.hstack([delta, U]), np.hstack([U, delta - U @ M]), symmetric=True)
    factor = LowRankUpdate(W0, WS, -U, symmetric=True)
    return SymmetricMatrixNormal(mean, factor)


def posterior_symmetric(prior, obs):
    """Condition ``N(A0, W0 ⊗s W0)`` on ``A S = Y``."""
    if obs.k == 0:
        return prior
    return _symmetric_block(prior, obs.S, obs.Y)


def posterior_symmetric_inverse(prior_H, obs):
    """Condition ``N(H0, W0 ⊗s W0)`` on ``H Y = S``."""
    if obs.k == 0:
        return prior_H
    return _symmetric_block(prior_H, obs.Y, obs.S)


def _append(op, U, V):
    """Add ``U V^T`` to an operator, flattening nested low-rank terms."""
    if isinstance(op, LowRankUpdate) and op.symmetric:
        return op.extended(U, V)
    return LowRankUpdate(op, np.empty((op.shape[0], 0)), np.empty((op.shape[1], 0)), symmetric=True).extended(U, V)


def update_one(belief, s, y, mode="matrix", ws=None):
    """Condition a symmetric belief on a single pair.

    In ``"matrix"`` mode the data is ``A s = y``; in ``"inverse"`` mode it is
    ``H y = s``. ``ws`` may carry a precomputed product of the covariance factor
    with the action (``W s``, or ``W y`` in inverse mode) to save an apply.
    """
    if mode not in ("matrix", "inverse"):
        raise PreconditionError(f"unknown mode {mode!r}")
    a, o = (np.asarray(s, float), np.asarray(y, float))
    if mode == "inverse":
        a, o = o, a
    w = belief.cov_factor.apply(a) if ws is None else np.asarray(ws, float)
    g = float(a @ w)
    if not g > 0.0:
        raise BreakdownError(f"Gram scalar {g:.3e} is not positive")
    u = w / g
    delta = o - belief.mean.apply(a)
    m = float(a @ delta)
    v = delta - 0.5 * m * u
    mean = _append(belief.mean, np.column_stack([u, v]), np.column_stack([v, u]))
    factor = _append(belief.cov_factor, w[:, None], -u[:, None])
    L = belief.mean_cholesky
    if L is not None:
        p, q = rank2_as_two_rank1(u, v)
        L = cholesky_rank1(cholesky_rank1(L, p, +1), q, -1, overwrite=True)
    return SymmetricMatrixNormal(mean, factor, L)
