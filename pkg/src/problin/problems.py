"""Test systems: kernel Gram matrices, random SPD matrices, a Poisson problem, grid transfer."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .distributions import SymmetricMatrixNormal
from .errors import DefinitenessError, PreconditionError, ShapeError
from .linalg import (
    DenseOperator,
    OrthogonalProjection,
    ProductOperator,
    ScaledIdentity,
    ScaledOperator,
    aslinearoperator,
)

KERNEL_FAMILIES = ("rbf", "matern32", "matern52")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "rbf"
    lengthscale: float = 1.0
    epsilon_sq: float = 0.0

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in KERNEL_FAMILIES:
            raise PreconditionError(f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}")
        object.__setattr__(self, "family", fam)
        if not self.lengthscale > 0:
            raise PreconditionError("lengthscale must be positive")
        if self.epsilon_sq < 0:
            raise PreconditionError("epsilon_sq must be nonnegative")


def _as_points(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def kernel_matrix(spec, X1, X2):
    """Undamped cross-kernel block ``k(X1, X2)``."""
    r = cdist(_as_points(X1), _as_points(X2)) / spec.lengthscale
    if spec.family == "rbf":
        return np.exp(-0.5 * r**2)
    if spec.family == "matern32":
        t = math.sqrt(3.0) * r
        return (1.0 + t) * np.exp(-t)
    t = math.sqrt(5.0) * r
    return (1.0 + t + t**2 / 3.0) * np.exp(-t)


def kernel_gram(spec, X):
    """``K + epsilon_sq I`` for the points ``X`` (rows), as a dense operator."""
    X = _as_points(X)
    if spec.epsilon_sq == 0.0 and len(np.unique(X, axis=0)) < len(X):
        warnings.warn("duplicate points with epsilon_sq = 0 give a singular Gram matrix", RuntimeWarning, stacklevel=2)
    K = kernel_matrix(spec, X, X)
    K[np.diag_indices_from(K)] += spec.epsilon_sq
    return DenseOperator(K, symmetric=True)


def random_spd(n, spectrum, seed=None):
    """``Q diag(spectrum) Q^T`` with Haar-distributed orthogonal ``Q``."""
    lam = np.asarray(spectrum, dtype=float)
    if lam.shape != (n,):
        raise ShapeError(f"spectrum must have length {n}, got {lam.shape}")
    if np.any(lam <= 0):
        raise PreconditionError("spectrum entries must be positive")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def default_boundary(x, y):
    return (x**2 - 2.0 * y) ** 2 * (1.0 + np.sin(2.0 * np.pi * x))


@dataclass(frozen=True)
class PoissonProblem:
    """Five-point Dirichlet Laplacian on the unit square, interior nodes in x-fastest order."""

    m: int
    h: float
    A: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self):
        return self.m * self.m

    def grid(self):
        t = self.h * np.arange(1, self.m + 1)
        return np.meshgrid(t, t)

    def operator(self):
        return DenseOperator(self.A, symmetric=True)


def _laplacian_1d(m):
    return sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])


def _gershgorin_check(A):
    d = A.diagonal()
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    if np.any(d - off < 0) or not np.any(d - off > 0):
        raise DefinitenessError("Gershgorin test does not certify positive definiteness")


def poisson_dirichlet(m, f=15.0, g: Callable | None = default_boundary):
    """Finite-difference system for ``-Δu = f`` with ``u = g`` on the boundary.

    ``f`` is a constant or a callable ``f(x, y)``; ``g=None`` means zero boundary data.
    """
    if m < 2:
        raise PreconditionError("m must be at least 2")
    h = 1.0 / (m + 1)
    I = sp.identity(m)
    T = _laplacian_1d(m)
    A = ((sp.kron(I, T) + sp.kron(T, I)) / h**2).tocsr()
    _gershgorin_check(A)

    t = h * np.arange(1, m + 1)
    X, Y = np.meshgrid(t, t)
    F = f(X, Y) if callable(f) else np.full((m, m), float(f))
    B = np.zeros((m, m))
    if g is not None:
        # rows index y, columns index x
        B[:, 0] += g(0.0, t)
        B[:, -1] += g(1.0, t)
        B[0, :] += g(t, 0.0)
        B[-1, :] += g(t, 1.0)
    rhs = (F + B / h**2).ravel()
    return PoissonProblem(m, h, A, rhs)


def _interpolation_1d(m_c):
    m_f = 2 * m_c + 1
    R = np.zeros((m_f, m_c))
    for j in range(m_c):
        i = 2 * j + 1  # fine index of coarse node j
        R[i, j] = 1.0
        R[i - 1, j] = 0.5
        R[i + 1, j] = 0.5
    return R


def interpolation(m_c, m_f):
    """Bilinear interpolation from an ``m_c`` to an ``m_f`` interior grid."""
    if m_f == m_c:
        return np.eye(m_c * m_c)
    if m_f != 2 * m_c + 1:
        raise PreconditionError(f"grids are not nested: fine size {m_f} != 2 * {m_c} + 1")
    R = _interpolation_1d(m_c)
    return np.kron(R, R)


def prolongation(m_c, m_f):
    """Orthonormalized bilinear interpolation ``P`` with ``P^T P = I``."""
    Q, R = np.linalg.qr(interpolation(m_c, m_f))
    return Q * np.sign(np.diag(R))


def predictive_fine_prior(H_coarse, P, lambda_inflate=0.0, complement_scale=0.0):
    """Transport a coarse inverse belief to the fine grid.

    Mean ``P H Pᵀ`` and covariance factor ``P W Pᵀ + sqrt(lambda_inflate) I``.
    ``complement_scale`` adds ``c (I - P Pᵀ)`` to the mean so that it is
    invertible and usable as a solver prior; 0 keeps the bare transport.
    """
    P = np.asarray(P, dtype=float)
    if P.shape[1] != H_coarse.n:
        raise ShapeError("prolongation does not match the coarse belief")
    if lambda_inflate < 0 or complement_scale < 0:
        raise PreconditionError("lambda_inflate and complement_scale must be nonnegative")
    Pop = DenseOperator(P, symmetric=False)

    def transport(op):
        return ProductOperator(Pop, ProductOperator(op, Pop.T), symmetric=True)

    mean = transport(H_coarse.mean)
    if complement_scale > 0 and P.shape[0] > P.shape[1]:
        mean = mean + ScaledOperator(OrthogonalProjection(P), complement_scale)
    factor = transport(H_coarse.cov_factor)
    if lambda_inflate > 0:
        factor = factor + ScaledIdentity(P.shape[0], math.sqrt(lambda_inflate))
    return SymmetricMatrixNormal(mean, factor)


@dataclass(frozen=True)
class GPPrediction:
    mean: np.ndarray
    variance: np.ndarray
    trace_budget: np.ndarray


def gp_propagate(K_op, y, ktilde, result, kxx=1.0):
    """GP predictions from a solver run on ``(K + eps² I) z = y``.

    The variance uses the inverse belief mean, so no extra solver iterations
    are needed; ``trace_budget[j] = ktilde_jᵀ Cov[z] ktilde_j``.
    """
    K_op = aslinearoperator(K_op)
    ktilde = np.asarray(ktilde, dtype=float)
    y = np.asarray(y, dtype=float)
    n = K_op.shape[0]
    if ktilde.ndim == 1:
        ktilde = ktilde[:, None]
    if ktilde.shape[0] != n or y.shape != (n,):
        raise ShapeError("cross-kernel block and targets must have n rows")
    if result.x.shape != (n,):
        raise ShapeError("solver result does not match the Gram matrix")
    mean = ktilde.T @ result.x
    Hk = result.H_belief.mean.apply(ktilde)
    variance = np.asarray(kxx, dtype=float) - np.einsum("ij,ij->j", ktilde, Hk)
    Ck = result.x_belief.cov.apply(ktilde)
    budget = np.einsum("ij,ij->j", ktilde, Ck)
    return GPPrediction(mean, variance, budget)


def spd_suite(sizes=(10, 20, 50, 64, 100, 128), condition=1e4, seeds=range(3)):
    """Random SPD problems with eigenvalues uniform on ``[1, condition]``, both ends attained.

    Yields ``(name, A, b)``.
    """
    for n in sizes:
        for seed in seeds:
            rng = np.random.default_rng(seed)
            if n == 1:
                lam = np.ones(1)
            else:
                lam = np.concatenate([[1.0, condition], rng.uniform(1.0, condition, n - 2)])
            A = random_spd(n, lam, seed=rng)
            yield f"uniform-n{n}-s{seed}", A, rng.standard_normal(n)

