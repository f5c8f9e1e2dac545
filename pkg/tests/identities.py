"""Kronecker, box and symmetric Kronecker identities as (lazy, dense) pairs.

Each case maps ``(rng, n)`` to ``(lhs, rhs)``: the left side is built only
from the package's apply routines, the right side from explicit matrices in
:mod:`oracles`. Existence claims (non-commutativity) are listed separately.
"""

import numpy as np

from problin import box_apply, kron_apply, smat, svec, sym_kron_apply

from oracles import dense_box, dense_kron, dense_symkron, vec


def _mats(rng, n, count):
    return rng.standard_normal((count, n, n))


def _invertible(rng, n):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (U * rng.uniform(0.5, 2.0, n)) @ V.T


def _spd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def _sym(rng, n):
    M = rng.standard_normal((n, n))
    return M + M.T


def _sym_vec(rng, n):
    return svec(_sym(rng, n))


def _dense_of(apply, size):
    return np.column_stack([apply(e) for e in np.eye(size)])


def _q(v, n):
    """``Q vec(M)``: packs the symmetric part of M."""
    M = v.reshape((n, n), order="F")
    return svec(0.5 * (M + M.T))


def _qt(z):
    return vec(smat(z))


def _symkron_lifted(A, v, n):
    """``Q^T (A ⊗s A) Q`` applied to a full-length vector."""
    return _qt(sym_kron_apply(A, A, _q(v, n)))


# Kronecker product ---------------------------------------------------------


def kron_char(rng, n):
    A, B = _mats(rng, n, 2)
    x = rng.standard_normal(n * n)
    return kron_apply(A, B, x), dense_kron(A, B) @ x


def kron_rect(rng, n):
    A = rng.standard_normal((n, n + 1))
    B = rng.standard_normal((n + 2, n))
    x = rng.standard_normal((n + 1) * n)
    return kron_apply(A, B, x), dense_kron(A, B) @ x


def kron_transpose(rng, n):
    A, B = _mats(rng, n, 2)
    x = rng.standard_normal(n * n)
    return kron_apply(A.T, B.T, x), dense_kron(A, B).T @ x


def kron_inverse(rng, n):
    A, B = _invertible(rng, n), _invertible(rng, n)
    x = rng.standard_normal(n * n)
    return kron_apply(np.linalg.inv(A), np.linalg.inv(B), x), np.linalg.solve(dense_kron(A, B), x)


def kron_distributive(rng, n):
    A, B, C = _mats(rng, n, 3)
    x = rng.standard_normal(n * n)
    return kron_apply(A + B, C, x), (dense_kron(A, C) + dense_kron(B, C)) @ x


def kron_mixed_product(rng, n):
    A, B, C, D = _mats(rng, n, 4)
    x = rng.standard_normal(n * n)
    return kron_apply(A, B, kron_apply(C, D, x)), dense_kron(A @ C, B @ D) @ x


def kron_trace(rng, n):
    A, B = _mats(rng, n, 2)
    M = _dense_of(lambda e: kron_apply(A, B, e), n * n)
    return np.array([np.trace(M)]), np.array([np.trace(A) * np.trace(B)])


def kron_symmetric(rng, n):
    A, B = _sym(rng, n), _sym(rng, n)
    M = _dense_of(lambda e: kron_apply(A, B, e), n * n)
    return M, M.T


def kron_cholesky(rng, n):
    A, B = _spd(rng, n), _spd(rng, n)
    La, Lb = np.linalg.cholesky(A), np.linalg.cholesky(B)
    x = rng.standard_normal(n * n)
    return kron_apply(La, Lb, kron_apply(La.T, Lb.T, x)), dense_kron(A, B) @ x


def kron_eigen(rng, n):
    A, B = _sym(rng, n), _sym(rng, n)
    la, Ua = np.linalg.eigh(A)
    lb, Ub = np.linalg.eigh(B)
    x = rng.standard_normal(n * n)
    inner = kron_apply(np.diag(la), np.diag(lb), kron_apply(Ua.T, Ub.T, x))
    return kron_apply(Ua, Ub, inner), dense_kron(A, B) @ x


# Box product ---------------------------------------------------------------


def box_char(rng, n):
    A, B = _mats(rng, n, 2)
    x = rng.standard_normal(n * n)
    return box_apply(A, B, x), dense_box(A, B) @ x


def box_rect(rng, n):
    A = rng.standard_normal((n + 1, n))
    B = rng.standard_normal((n, n + 2))
    x = rng.standard_normal(n * (n + 2))
    return box_apply(A, B, x), dense_box(A, B) @ x


def box_transpose(rng, n):
    A, B = _mats(rng, n, 2)
    x = rng.standard_normal(n * n)
    return box_apply(B.T, A.T, x), dense_box(A, B).T @ x


def box_inverse(rng, n):
    A, B = _invertible(rng, n), _invertible(rng, n)
    x = rng.standard_normal(n * n)
    return box_apply(np.linalg.inv(B), np.linalg.inv(A), x), np.linalg.solve(dense_box(A, B), x)


def box_distributive(rng, n):
    A, B, C = _mats(rng, n, 3)
    x = rng.standard_normal(n * n)
    return box_apply(A + B, C, x), (dense_box(A, C) + dense_box(B, C)) @ x


def box_box(rng, n):
    A, B, C, D = _mats(rng, n, 4)
    x = rng.standard_normal(n * n)
    return box_apply(A, B, box_apply(C, D, x)), dense_kron(A @ D, B @ C) @ x


def box_kron(rng, n):
    A, B, C, D = _mats(rng, n, 4)
    x = rng.standard_normal(n * n)
    return box_apply(A, B, kron_apply(C, D, x)), dense_box(A @ D, B @ C) @ x


def kron_box(rng, n):
    A, B, C, D = _mats(rng, n, 4)
    x = rng.standard_normal(n * n)
    return kron_apply(A, B, box_apply(C, D, x)), dense_box(A @ C, B @ D) @ x


def box_trace(rng, n):
    A, B = _mats(rng, n, 2)
    M = _dense_of(lambda e: box_apply(A, B, e), n * n)
    return np.array([np.trace(M)]), np.array([np.trace(A @ B)])


# Symmetric Kronecker product -------------------------------------------------


def symkron_char(rng, n):
    A, B = _mats(rng, n, 2)
    x = _sym_vec(rng, n)
    return sym_kron_apply(A, B, x), dense_symkron(A, B) @ x


def symkron_commutes(rng, n):
    A, B = _mats(rng, n, 2)
    x = _sym_vec(rng, n)
    return sym_kron_apply(B, A, x), dense_symkron(A, B) @ x


def symkron_transpose(rng, n):
    A, B = _mats(rng, n, 2)
    x = _sym_vec(rng, n)
    return sym_kron_apply(A.T, B.T, x), dense_symkron(A, B).T @ x


def symkron_inverse(rng, n):
    A = _invertible(rng, n)
    Ai = np.linalg.inv(A)
    x = _sym_vec(rng, n)
    return sym_kron_apply(Ai, Ai, x), np.linalg.solve(dense_symkron(A, A), x)


def symkron_distributive(rng, n):
    A, B, C = _mats(rng, n, 3)
    x = _sym_vec(rng, n)
    return sym_kron_apply(A + B, C, x), (dense_symkron(A, C) + dense_symkron(B, C)) @ x


def symkron_product(rng, n):
    A, B, C, D = _mats(rng, n, 4)
    x = _sym_vec(rng, n)
    rhs = 0.5 * (dense_symkron(A @ C, B @ D) + dense_symkron(A @ D, B @ C)) @ x
    return sym_kron_apply(A, B, sym_kron_apply(C, D, x)), rhs


def symkron_symmetric(rng, n):
    A, B = _sym(rng, n), _sym(rng, n)
    m = n * (n + 1) // 2
    M = _dense_of(lambda e: sym_kron_apply(A, B, e), m)
    return M, M.T


def symkron_cholesky(rng, n):
    A = _spd(rng, n)
    L = np.linalg.cholesky(A)
    x = _sym_vec(rng, n)
    return sym_kron_apply(L, L, sym_kron_apply(L.T, L.T, x)), dense_symkron(A, A) @ x


def symkron_eigen(rng, n):
    A = _sym(rng, n)
    lam, U = np.linalg.eigh(A)
    Lam = np.diag(lam)
    x = _sym_vec(rng, n)
    inner = sym_kron_apply(Lam, Lam, sym_kron_apply(U.T, U.T, x))
    return sym_kron_apply(U, U, inner), dense_symkron(A, A) @ x


# Mixed identities ------------------------------------------------------------


def _constrained_x(rng, n, k):
    """``B, C`` (n x k) and ``X`` (k x k) with ``C X B^T`` symmetric."""
    C = rng.standard_normal((n, k))
    R = _invertible(rng, k)
    B = C @ R
    X = _sym(rng, k) @ np.linalg.inv(R).T
    return B, C, X


def mixed_symkron_kron(rng, n):
    A = _sym(rng, n)
    k = max(1, n - 1)
    B, C, X = _constrained_x(rng, n, k)
    lhs = _symkron_lifted(A, kron_apply(B, C, vec(X)), n)
    rhs = 0.5 * (dense_kron(A @ B, A @ C) + dense_box(A @ C, A @ B)) @ vec(X)
    return lhs, rhs


def mixed_kron_symkron(rng, n):
    A = _sym(rng, n)
    k = max(1, n - 1)
    B, C = rng.standard_normal((2, n, k))
    # row-vector form: v^T (B^T ⊗ C^T) Q^T (A ⊗s A) Q
    lift = _dense_of(lambda e: _symkron_lifted(A, e, n), n * n)
    lhs = _dense_of(lambda e: kron_apply(B.T, C.T, e), n * n) @ lift
    rhs = 0.5 * (dense_kron(B.T @ A, C.T @ A) + dense_box(B.T @ A, C.T @ A))
    return lhs, rhs


def mixed_sandwich(rng, n):
    A = _sym(rng, n)
    k = max(1, n - 1)
    B, C, X = _constrained_x(rng, n, k)
    lhs = kron_apply(B.T, C.T, _symkron_lifted(A, kron_apply(B, C, vec(X)), n))
    rhs = 0.5 * (dense_kron(B.T @ A @ B, C.T @ A @ C) + dense_box(B.T @ A @ C, C.T @ A @ B)) @ vec(X)
    return lhs, rhs


def mixed_right_inverse(rng, n):
    A = _spd(rng, n)
    k = max(1, n - 1)
    C = _invertible(rng, n)[:, :k]
    Cp = np.linalg.pinv(C)
    Y = _sym(rng, k) @ Cp + rng.standard_normal((k, n)) @ (np.eye(n) - C @ Cp)
    CAC_inv = np.linalg.inv(C.T @ A @ C)
    G_right = dense_kron(2 * np.linalg.inv(A) - C @ CAC_inv @ C.T, CAC_inv)
    I = np.eye(n)
    z = G_right @ vec(Y)
    lhs = kron_apply(I, C.T, _symkron_lifted(A, kron_apply(I, C, z), n))
    return lhs, vec(Y)


def mixed_symkron_kron_symkron(rng, n):
    A = _sym(rng, n)
    D = rng.standard_normal((n, n))
    E = D.copy()
    z = _sym_vec(rng, n)
    w = _q(kron_apply(D, E, _qt(sym_kron_apply(A, A, z))), n)
    lhs = sym_kron_apply(A.T, A.T, w)
    rhs = dense_symkron(A.T @ D @ A, A.T @ E @ A) @ z
    return lhs, rhs


IDENTITIES = {
    "kronecker": [
        kron_char, kron_rect, kron_transpose, kron_inverse, kron_distributive,
        kron_mixed_product, kron_trace, kron_symmetric, kron_cholesky, kron_eigen,
    ],
    "box": [
        box_char, box_rect, box_transpose, box_inverse, box_distributive,
        box_box, box_kron, kron_box, box_trace,
    ],
    "symmetric_kronecker": [
        symkron_char, symkron_commutes, symkron_transpose, symkron_inverse,
        symkron_distributive, symkron_product, symkron_symmetric, symkron_cholesky, symkron_eigen,
    ],
    "mixed": [
        mixed_symkron_kron, mixed_kron_symkron, mixed_sandwich,
        mixed_right_inverse, mixed_symkron_kron_symkron,
    ],
}

ALL_IDENTITIES = [(group, fn) for group, fns in IDENTITIES.items() for fn in fns]


def relative_gap(lhs, rhs):
    lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1.0))


def noncommuting_witness():
    """Matrices for which both products differ from their swapped versions."""
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    B = np.array([[0.0, 1.0], [1.0, 3.0]])
    x = np.arange(1.0, 5.0)
    return A, B, x
