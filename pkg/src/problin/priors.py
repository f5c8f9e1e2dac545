"""Prior construction: scalar means, the empirical-Bayes covariance class, warm starts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DefinitenessError, InvalidSystemError, PreconditionError
from .inference import ObservationBlock
from .linalg import (
    DenseOperator,
    LinearOperator,
    LowRankUpdate,
    OrthogonalProjection,
    ProductOperator,
    ScaledIdentity,
    ScaledOperator,
    aslinearoperator,
    orthonormal_basis,
)


@dataclass(frozen=True)
class PriorSpec:
    """Prior mean and unexplored-space scales.

    Either ``alpha`` (``A0 = alpha I``, ``H0 = I / alpha``) or an explicit
    operator pair is used. ``alpha="trace"`` requests ``tr(A)/n``. ``A0`` may be
    omitted when only the inverse view is wanted. ``phi`` and ``psi`` apply when
    no calibration method overrides them.
    """

    alpha: float | str | None = 1.0
    A0: LinearOperator | None = None
    H0: LinearOperator | None = None
    phi: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if self.H0 is None:
            if isinstance(self.alpha, str):
                if self.alpha != "trace":
                    raise PreconditionError(f"unknown alpha option {self.alpha!r}")
            elif self.alpha is None or not self.alpha > 0:
                raise PreconditionError("alpha must be positive")
        else:
            object.__setattr__(self, "H0", aslinearoperator(self.H0))
            if self.A0 is not None:
                object.__setattr__(self, "A0", aslinearoperator(self.A0))
                if inverse_defect(self.A0, self.H0) > 1e-8:
                    raise PreconditionError("explicit A0 and H0 are not mutually inverse")
        if self.phi < 0 or self.psi < 0:
            raise PreconditionError("phi and psi must be nonnegative")

    @property
    def is_scalar(self):
        return self.H0 is None


def inverse_defect(A0, H0, seed=0, trials=3):
    """Relative size of ``(A0 H0 - I) v`` on random probes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(H0.shape[0])
        worst = max(worst, np.linalg.norm(A0.apply(H0.apply(v)) - v) / np.linalg.norm(v))
    return worst


def scalar_mean_from_trace(A, samples=10, seed=0):
    """``tr(A)/n``; exact for dense operators, else a Hutchinson estimate."""
    A = aslinearoperator(A)
    n = A.shape[0]
    if isinstance(A, DenseOperator):
        return float(np.sum(A.diagonal())) / n
    z = np.random.default_rng(seed).choice([-1.0, 1.0], size=(n, samples))
    est = float(np.mean(np.einsum("ij,ij->j", z, A.apply(z)))) / n
    if not est > 0:
        raise DefinitenessError("trace estimate is not positive")
    return est


def _spd_inverse_apply(G, R):
    G = 0.5 * (G + G.T)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("Gram matrix is not positive definite") from exc
    return np.linalg.solve(L.T, np.linalg.solve(L, R))


def _class_operator(Z, M, scale, basis):
    """``Z M^{-1} Z^T + scale P_{basis⊥}`` as a lazy symmetric operator."""
    n = Z.shape[0]
    proj = ScaledOperator(OrthogonalProjection(orthonormal_basis(basis)), scale)
    if Z.shape[1] == 0:
        return ScaledIdentity(n, scale)
    return LowRankUpdate(proj, Z, _spd_inverse_apply(M, Z.T).T, symmetric=True)


def covariance_class_WA(obs, phi):
    """``Y (S^T Y)^{-1} Y^T + phi P_{S⊥}``."""
    return _class_operator(obs.Y, obs.S.T @ obs.Y, phi, obs.S)


def covariance_class_WH(obs, A0_inv, psi):
    """``H0 Y (Y^T H0 Y)^{-1} Y^T H0 + psi P_{Y⊥}`` with ``H0 = A0^{-1}``."""
    if obs.k == 0:
        return ScaledIdentity(obs.n, psi)
    HY = aslinearoperator(A0_inv).apply(obs.Y)
    return _class_operator(HY, obs.Y.T @ HY, psi, obs.Y)


def prior_from_guess(x0, b, alpha, bAb=None):
    """Prior mean pair whose inverse view maps ``b`` to the initial guess.

    Returns ``(H0, A0, adjusted_x0)``. A guess pointing away from ``b`` is
    negated; a guess orthogonal to ``b`` is replaced by the optimal multiple of
    ``b``, which needs ``bAb = b^T A b``. ``alpha`` is clamped to half its upper
    bound ``b^T x0 / b^T b`` when too large.
    """
    x0 = np.asarray(x0, dtype=float)
    b = np.asarray(b, dtype=float)
    bb = float(b @ b)
    if bb == 0.0:
        raise InvalidSystemError("right-hand side is zero")
    xb = float(x0 @ b)
    if xb < 0:
        x0 = -x0
        xb = -xb
    elif xb == 0.0:
        if bAb is None or not bAb > 0:
            raise PreconditionError("a guess orthogonal to b needs a positive b^T A b")
        x0 = (bb / bAb) * b
        xb = float(x0 @ b)
    bound = xb / bb
    if not 0 < alpha < bound:
        alpha = 0.5 * bound
    n = b.size
    d = x0 - alpha * b
    db, dx = float(d @ b), float(d @ x0)
    if db == 0.0:
        # x0 is a multiple of b with alpha on the bound, which clamping excludes
        raise PreconditionError("degenerate guess")
    H0 = LowRankUpdate(ScaledIdentity(n, alpha), d[:, None], d[:, None] / db, symmetric=True)
    A0 = LowRankUpdate(ScaledIdentity(n, 1.0 / alpha), d[:, None], -d[:, None] / (alpha * dx), symmetric=True)
    return H0, A0, x0


@dataclass(frozen=True)
class PreconditionedSystem:
    A: LinearOperator
    b: np.ndarray
    pullback: Callable[[np.ndarray], np.ndarray]


def precondition(P_inv, A, b):
    """Transform to ``P^{-T} A P^{-1} x' = P^{-T} b`` with ``x = P^{-1} x'``."""
    P_inv = aslinearoperator(P_inv)
    A = aslinearoperator(A)
    Ap = ProductOperator(P_inv.T, ProductOperator(A, P_inv), symmetric=True)
    bp = P_inv.apply_transpose(np.asarray(b, dtype=float))
    return PreconditionedSystem(Ap, bp, P_inv.apply)
