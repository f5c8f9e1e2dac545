"""The probabilistic linear solver iteration."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationMethod, compute_phi_psi
from .distributions import GaussianVector, SymmetricMatrixNormal, solution_belief
from .errors import (
    AlreadyConverged,
    BreakdownError,
    DefinitenessError,
    InvalidSystemError,
    PreconditionError,
)
from .inference import ObservationBlock, update_one
from .linalg import (
    LinearOperator,
    OrthogonalProjection,
    LowRankUpdate,
    ScaledIdentity,
    ScaledOperator,
    aslinearoperator,
    symmetry_defect,
)
from .priors import PriorSpec, scalar_mean_from_trace

log = logging.getLogger(__name__)

BREAKDOWN_RTOL = 1e-14
# Relative W-norm below which the new part of an observation is treated as rounding.
INFORMATIVE_RTOL = 1e-8
STOP_REASONS = ("residual", "trace", "max_iter", "breakdown")


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-6
    atol: float = 0.0
    max_iter: int | None = None
    calibration: CalibrationMethod = None
    seed: int = 0
    compute_A_belief: bool = True
    recompute_every: int = 50
    track_cholesky: bool = False

    def __post_init__(self):
        if self.rtol < 0 or self.atol < 0:
            raise PreconditionError("tolerances must be nonnegative")
        if self.rtol == 0 and self.atol == 0:
            raise PreconditionError("rtol and atol cannot both be zero")
        if self.max_iter is not None and self.max_iter < 1:
            raise PreconditionError("max_iter must be at least 1")
        if self.recompute_every < 1:
            raise PreconditionError("recompute_every must be at least 1")


@dataclass
class SolverState:
    """Mutable loop state. ``S`` and ``Y`` views grow by one column per iteration."""

    x: np.ndarray
    r: np.ndarray
    b: np.ndarray
    i: int = 0
    belief_A: SymmetricMatrixNormal | None = None
    belief_H: SymmetricMatrixNormal | None = None
    alphas: list = field(default_factory=list)
    curvatures: list = field(default_factory=list)
    phi: float = 0.0
    psi: float = 0.0
    trace_W_H: float = 0.0
    trace_cov_x: float = 0.0
    trace_active: bool = True
    _S: np.ndarray | None = None
    _Y: np.ndarray | None = None
    _Qs: np.ndarray | None = None
    _Qy: np.ndarray | None = None
    rank_S: int = 0
    rank_Y: int = 0
    H0: LinearOperator | None = None

    def __post_init__(self):
        n = self.b.size
        if self._S is None:
            self._S, self._Y, self._Qs, self._Qy = (np.zeros((n, 0), order="F") for _ in range(4))

    @property
    def n(self):
        return self.b.size

    @property
    def S(self):
        return self._S[:, : self.i]

    @property
    def Y(self):
        return self._Y[:, : self.i]

    @property
    def b_norm(self):
        return float(np.linalg.norm(self.b))

    @property
    def residual_norm(self):
        return float(np.linalg.norm(self.r))

    def push(self, s, y):
        if self.i == self._S.shape[1]:
            cap = max(8, 2 * self.i)
            self._S, self._Y = _grow(self._S, cap), _grow(self._Y, cap)
            # a basis never needs more than n columns
            self._Qs, self._Qy = _grow(self._Qs, min(cap, self.n)), _grow(self._Qy, min(cap, self.n))
        self._S[:, self.i] = s
        self._Y[:, self.i] = y
        self.curvatures.append(float(s @ y))
        self.rank_S = _extend_basis(self._Qs, self.rank_S, s)
        self.rank_Y = _extend_basis(self._Qy, self.rank_Y, y)
        self.i += 1

    def observations(self):
        return ObservationBlock(self.S, self.Y)

    def projection_Y(self):
        return OrthogonalProjection(self._Qy[:, : self.rank_Y])

    def projection_S(self):
        return OrthogonalProjection(self._Qs[:, : self.rank_S])


def _grow(buf, cap):
    """Column-major copy of ``buf`` with ``cap`` columns."""
    out = np.zeros((buf.shape[0], max(cap, buf.shape[1])), order="F")
    out[:, : buf.shape[1]] = buf
    return out


def _extend_basis(Q, k, v):
    """Append v to an orthonormal basis by Gram-Schmidt with one reorthogonalization."""
    if k >= min(Q.shape):
        return k
    q = np.array(v, dtype=float)
    B = Q[:, :k]
    for _ in range(2):
        q -= B @ (B.T @ q)
    nrm = np.linalg.norm(q)
    if nrm <= 1e-14 * np.linalg.norm(v):
        return k
    Q[:, k] = q / nrm
    return k + 1


@dataclass
class SolverResult:
    x_belief: GaussianVector
    A_belief: SymmetricMatrixNormal | None
    H_belief: SymmetricMatrixNormal
    iterations: int
    stop_reason: str
    residual_history: list
    trace_history: list
    S: np.ndarray
    Y: np.ndarray
    alphas: np.ndarray
    phi: float
    psi: float
    wall_time: float = 0.0

    @property
    def x(self):
        return self.x_belief.mean


def policy(H_belief, r):
    """Next action ``-E[H] r``."""
    r = np.asarray(r, dtype=float)
    if not np.any(r):
        raise AlreadyConverged("residual is zero")
    return -H_belief.mean.apply(r)


def step_size(s, r, y):
    """Exact line search step along ``s`` for the quadratic with gradient ``r``."""
    sy = float(s @ y)
    if sy <= BREAKDOWN_RTOL * np.linalg.norm(s) * np.linalg.norm(y):
        raise BreakdownError(f"curvature s^T y = {sy:.3e} is not safely positive")
    return -float(s @ r) / sy


def trace_cov_x(state):
    """``tr(Cov[x])`` for the calibrated inverse belief ``W = psi P_{Y⊥}``.

    With ``W = psi P``: ``tr = 0.5 psi^2 ||P b||^2 (tr(P) + 1)``.
    """
    psi = state.psi
    if psi == 0.0:
        state.trace_W_H = 0.0
        return 0.0
    Pb = state.projection_Y().apply(state.b)
    trP = state.n - state.rank_Y
    state.trace_W_H = psi * trP
    return 0.5 * psi * psi * float(Pb @ Pb) * (trP + 1)


def should_stop(state, config):
    """Stopping rule; the trace criterion wins ties."""
    tol = max(config.rtol * state.b_norm, config.atol)
    if state.trace_active and math.sqrt(max(state.trace_cov_x, 0.0)) <= tol:
        return True, "trace"
    if state.residual_norm <= tol:
        return True, "residual"
    max_iter = config.max_iter if config.max_iter is not None else 10 * state.n
    if state.i >= max_iter:
        return True, "max_iter"
    return False, None


def _explored_free(state, r):
    """Remove the components of ``r`` along ``Y`` that make ``S^T r`` nonzero.

    A no-op in exact arithmetic. With ``H Y = S`` one has
    ``s_i^T A s = -s_i^T r``, so this keeps the actions conjugate in floating point.
    """
    if state.i == 0:
        return r
    S, Y = state.S, state.Y
    sy = np.asarray(state.curvatures)
    for _ in range(2):
        r = r - Y @ ((S.T @ r) / sy)
    return r


def _informative(a, a_prior_norm_sq, wa):
    """True when ``a^T W a`` is not negligible against ``a^T W0 a``."""
    return float(a @ wa) > INFORMATIVE_RTOL**2 * a_prior_norm_sq


def _check_system(A, b, seed):
    if A.shape[0] != A.shape[1]:
        raise InvalidSystemError(f"matrix is not square: {A.shape}")
    if b.shape != (A.shape[0],):
        raise InvalidSystemError(f"right-hand side of shape {b.shape} does not match {A.shape}")
    if not np.all(np.isfinite(b)):
        raise InvalidSystemError("right-hand side has non-finite entries")
    if symmetry_defect(A, seed=seed) > 1e-8:
        raise PreconditionError("matrix is not symmetric")


def _initial_beliefs(A, b, prior, config):
    n = b.size
    if prior.is_scalar:
        alpha = prior.alpha
        if alpha == "trace":
            alpha = scalar_mean_from_trace(A, seed=config.seed)
        H0 = ScaledIdentity(n, 1.0 / alpha)
        A0 = ScaledIdentity(n, alpha)
    else:
        H0, A0 = prior.H0, prior.A0
    belief_H = SymmetricMatrixNormal(H0, H0)
    belief_A = None
    if config.compute_A_belief and A0 is not None:
        L = None
        if config.track_cholesky:
            L = np.linalg.cholesky(A0.to_dense())
        # The working factor for the A view satisfies W s = y, which A itself does.
        belief_A = SymmetricMatrixNormal(A0, ScaledOperator(A, 1.0), L)
    return belief_A, belief_H


def _calibrate(state, prior, config):
    method = config.calibration
    if method is None:
        state.phi, state.psi = prior.phi, prior.psi
    elif state.i >= state.n:
        state.phi, state.psi = 0.0, 0.0
    else:
        state.phi, state.psi = compute_phi_psi(method, state.observations(), state.n)
    state.trace_active = state.psi > 0.0
    state.trace_cov_x = trace_cov_x(state)


def solve(A, b, prior=None, config=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Returns a :class:`SolverResult` whose beliefs use the calibrated
    covariance class: ``W_A = phi P_{S⊥}`` and ``W_H = psi P_{Y⊥}``.
    """
    t0 = time.perf_counter()
    A = aslinearoperator(A)
    b = np.asarray(b, dtype=float)
    prior = PriorSpec() if prior is None else prior
    config = SolverConfig() if config is None else config
    _check_system(A, b, config.seed)

    belief_A, belief_H = _initial_beliefs(A, b, prior, config)
    x = belief_H.mean.apply(b)
    state = SolverState(x=x, r=A.apply(x) - b, b=b, belief_A=belief_A, belief_H=belief_H, H0=belief_H.mean)
    _calibrate(state, prior, config)
    res_hist, tr_hist = [], []
    stop, reason = should_stop(state, config)

    while not stop:
        try:
            s = policy(state.belief_H, _explored_free(state, state.r))
        except AlreadyConverged:
            stop, reason = True, "residual"
            break
        y = A.apply(s)
        try:
            alpha = step_size(s, state.r, y)
        except BreakdownError as exc:
            log.warning("breakdown at iteration %d: %s", state.i + 1, exc)
            stop, reason = True, "breakdown"
            break
        # A pair with no component outside the explored space leaves a belief unchanged.
        wy = state.belief_H.cov_factor.apply(y)
        if _informative(y, float(y @ state.H0.apply(y)), wy):
            state.belief_H = update_one(state.belief_H, s, y, "inverse", ws=wy)
        if state.belief_A is not None:
            fac = state.belief_A.cov_factor
            ws = y + fac.correction(s) if isinstance(fac, LowRankUpdate) else y
            if _informative(s, float(s @ y), ws):
                try:
                    state.belief_A = update_one(state.belief_A, s, y, "matrix", ws=ws)
                except DefinitenessError as exc:
                    log.warning("A-view mean lost definiteness at iteration %d: %s", state.i + 1, exc)
                    stop, reason = True, "breakdown"
                    break
        state.x = state.x + alpha * s
        state.r = state.r + alpha * y
        state.alphas.append(alpha)
        state.push(s, y)
        if state.i % config.recompute_every == 0:
            state.r = A.apply(state.x) - b
        _calibrate(state, prior, config)
        res_hist.append(state.residual_norm)
        tr_hist.append(state.trace_cov_x)
        stop, reason = should_stop(state, config)
        log.debug("iter %d  |r| = %.3e  tr = %.3e", state.i, res_hist[-1], tr_hist[-1])

    return _assemble(state, A, b, reason, res_hist, tr_hist, time.perf_counter() - t0)


def _assemble(state, A, b, reason, res_hist, tr_hist, elapsed):
    n = state.n
    W_H = ScaledOperator(state.projection_Y(), state.psi)
    H_belief = SymmetricMatrixNormal(state.belief_H.mean, W_H)
    A_belief = None
    if state.belief_A is not None:
        A_belief = SymmetricMatrixNormal(
            state.belief_A.mean, ScaledOperator(state.projection_S(), state.phi), state.belief_A.mean_cholesky
        )
    xb = solution_belief(H_belief, b)
    x_belief = GaussianVector(state.x.copy(), xb.cov, xb.trace_cov)
    log.info("stopped after %d iterations (%s), |r| = %.3e", state.i, reason, state.residual_norm)
    return SolverResult(
        x_belief=x_belief,
        A_belief=A_belief,
        H_belief=H_belief,
        iterations=state.i,
        stop_reason=reason,
        residual_history=res_hist,
        trace_history=tr_hist,
        S=state.S.copy(),
        Y=state.Y.copy(),
        alphas=np.array(state.alphas),
        phi=state.phi,
        psi=state.psi,
        wall_time=elapsed,
    )


def prior_result(A, b, prior=None, config=None):
    """Result object for zero iterations: the prior belief with no data."""
    A = aslinearoperator(A)
    b = np.asarray(b, dtype=float)
    prior = PriorSpec() if prior is None else prior
    config = SolverConfig() if config is None else config
    belief_A, belief_H = _initial_beliefs(A, b, prior, config)
    x = belief_H.mean.apply(b)
    state = SolverState(x=x, r=A.apply(x) - b, b=b, belief_A=belief_A, belief_H=belief_H)
    _calibrate(state, prior, config)
    return _assemble(state, A, b, "max_iter", [], [], 0.0)
