"""Scales for the unexplored subspace and the w-statistic used to judge them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DegenerateActionError, PreconditionError

GP_JITTER = 1e-10


@dataclass(frozen=True)
class SpectrumMean:
    """Mean of the eigenvalues not yet explored.

    ``eigenvalues`` is either the tail itself (length ``n - k``) or the full
    spectrum of length ``n``, in which case its ``n - k`` smallest entries are used.
    """

    eigenvalues: tuple = field(default=())

    def __post_init__(self):
        ev = tuple(float(e) for e in self.eigenvalues)
        if any(not e > 0 for e in ev):
            raise PreconditionError("eigenvalues must be positive")
        object.__setattr__(self, "eigenvalues", ev)


@dataclass(frozen=True)
class NoiseFloor:
    """Set both scales from a known spectral floor ``epsilon_sq``."""

    epsilon_sq: float

    def __post_init__(self):
        if not self.epsilon_sq > 0:
            raise PreconditionError("epsilon_sq must be positive")


@dataclass(frozen=True)
class RayleighGP:
    """GP regression of log Rayleigh quotients over log iteration index.

    ``theta0=None`` fits the intercept by least squares; ``signal_var=None``
    uses the empirical variance of the detrended targets. ``floor`` optionally
    clamps predictions from below at ``ln(floor)``.
    """

    theta0: float | None = None
    theta1: float = 1.5
    lengthscale: float = 1.0
    signal_var: float | None = None
    noise_var: float = 1e-2
    floor: float | None = None

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise PreconditionError("lengthscale must be positive")
        if self.noise_var < 0:
            raise PreconditionError("noise_var must be nonnegative")
        if self.signal_var is not None and self.signal_var < 0:
            raise PreconditionError("signal_var must be nonnegative")
        if self.floor is not None and not self.floor > 0:
            raise PreconditionError("floor must be positive")


CalibrationMethod = SpectrumMean | NoiseFloor | RayleighGP | None


@dataclass(frozen=True)
class RayleighSample:
    index: int
    log_rayleigh: float


def rayleigh_quotients(obs):
    """``ln(s_i^T y_i / s_i^T s_i)`` for each column, indexed from 1."""
    ss = np.einsum("ij,ij->j", obs.S, obs.S)
    if np.any(ss == 0.0):
        raise DegenerateActionError("zero action column")
    R = np.einsum("ij,ij->j", obs.S, obs.Y) / ss
    if np.any(R <= 0):
        raise DegenerateActionError("nonpositive Rayleigh quotient; A is not positive definite along an action")
    return [RayleighSample(i + 1, float(v)) for i, v in enumerate(np.log(R))]


def _rbf(t1, t2, ell, var):
    return var * np.exp(-0.5 * ((t1[:, None] - t2[None, :]) / ell) ** 2)


def fit_rayleigh_gp(samples, n, method):
    """Predicted ``ln R_i`` at indices ``k+1 .. n``, where ``k`` is the largest observed index."""
    if len(samples) < 2:
        raise PreconditionError("at least two samples are needed")
    idx = np.array([s.index for s in samples], dtype=float)
    order = np.argsort(idx, kind="stable")
    idx = idx[order]
    z = np.array([s.log_rayleigh for s in samples], dtype=float)[order]
    k = int(idx.max())
    if k >= n:
        return np.zeros(0)
    t = np.log(idx)
    th1 = method.theta1
    th0 = float(np.mean(z + th1 * t)) if method.theta0 is None else method.theta0
    resid = z - (th0 - th1 * t)
    var = float(np.var(resid)) if method.signal_var is None else method.signal_var
    t_new = np.log(np.arange(k + 1, n + 1, dtype=float))
    pred = th0 - th1 * t_new
    if var > 0:
        K = _rbf(t, t, method.lengthscale, var)
        K[np.diag_indices_from(K)] += max(method.noise_var, GP_JITTER)
        try:
            c = scipy.linalg.cho_factor(K, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("Rayleigh GP Gram matrix is singular after jitter") from exc
        pred = pred + _rbf(t_new, t, method.lengthscale, var) @ scipy.linalg.cho_solve(c, resid)
    if method.floor is not None:
        pred = np.maximum(pred, np.log(method.floor))
    return pred


def compute_phi_psi(method, obs, n):
    """Return ``(phi, psi)`` for the subspaces left unexplored after ``obs``."""
    k = obs.k
    if method is None or k >= n:
        return 0.0, 0.0
    if isinstance(method, NoiseFloor):
        phi = method.epsilon_sq
    elif isinstance(method, SpectrumMean):
        ev = np.asarray(method.eigenvalues)
        if ev.size == n:
            tail = np.sort(ev)[: n - k]
        elif ev.size == n - k:
            tail = ev
        else:
            raise PreconditionError(f"expected {n - k} tail eigenvalues (or the full spectrum of {n}), got {ev.size}")
        phi = float(np.mean(tail))
    elif isinstance(method, RayleighGP):
        if k == 0:
            return 0.0, 0.0
        samples = rayleigh_quotients(obs)
        if k == 1:
            phi = math.exp(samples[0].log_rayleigh)
        else:
            phi = float(np.exp(np.mean(fit_rayleigh_gp(samples, n, method))))
    else:
        raise PreconditionError(f"unknown calibration method {method!r}")
    return phi, 1.0 / phi


def w_statistic(x_star, belief):
    """``0.5 ln tr(Cov[x]) - ln ||x* - E[x]||``."""
    err = float(np.linalg.norm(np.asarray(x_star, float) - belief.mean))
    tr = belief.trace_cov
    if err == 0.0:
        warnings.warn("solution error is exactly zero; w is +inf", RuntimeWarning, stacklevel=2)
        return math.inf
    if tr <= 0.0:
        return -math.inf
    return 0.5 * math.log(tr) - math.log(err)
