"""Lazy linear operators and the small dense kernels built on them.

Operators act on 1-D vectors and on 2-D blocks whose columns are vectors.
Symmetric packing follows the column-major lower-triangle convention with
off-diagonal entries scaled by sqrt(2), which makes ``svec`` an isometry
between symmetric matrices (Frobenius norm) and vectors (Euclidean norm).
"""

from __future__ import annotations

import numbers

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import (
    DefinitenessError,
    PreconditionError,
    RankError,
    ShapeError,
    SizeError,
)

DENSE_LIMIT = 512
_SQRT2 = np.sqrt(2.0)


class LinearOperator:
    """Abstract matrix-free operator of shape ``(rows, cols)``.

    Subclasses implement ``_matmat`` and, unless symmetric, ``_rmatmat``.
    """

    # make ``ndarray @ op`` defer to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, shape, symmetric=False):
        rows, cols = (int(s) for s in shape)
        if rows < 1 or cols < 1:
            raise ShapeError(f"operator dimensions must be positive, got {shape}")
        if symmetric and rows != cols:
            raise ShapeError("a symmetric operator must be square")
        self.shape = (rows, cols)
        self.symmetric = bool(symmetric)

    # subclasses override these two
    def _matmat(self, X):
        raise NotImplementedError

    def _rmatmat(self, X):
        if self.symmetric:
            return self._matmat(X)
        raise NotImplementedError(f"{type(self).__name__} has no transpose apply")

    @staticmethod
    def _prepare(v, expected, what):
        v = np.asarray(v, dtype=float)
        if v.ndim not in (1, 2) or v.shape[0] != expected:
            raise ShapeError(f"{what}: expected leading dimension {expected}, got {v.shape}")
        return v

    def apply(self, v):
        v = self._prepare(v, self.shape[1], "apply")
        if v.ndim == 1:
            return self._matmat(v[:, None])[:, 0]
        return self._matmat(v)

    def apply_transpose(self, v):
        v = self._prepare(v, self.shape[0], "apply_transpose")
        if v.ndim == 1:
            return self._rmatmat(v[:, None])[:, 0]
        return self._rmatmat(v)

    def matvec(self, v):
        return self.apply(v)

    @property
    def T(self):
        if self.symmetric:
            return self
        return TransposeOperator(self)

    def to_dense(self, max_dim=DENSE_LIMIT):
        """Materialize the operator, refusing above ``max_dim`` rows or columns."""
        if max_dim is not None and max(self.shape) > max_dim:
            raise SizeError(f"refusing to densify a {self.shape} operator (limit {max_dim})")
        return self.apply(np.eye(self.shape[1]))

    def diagonal(self):
        n = min(self.shape)
        if max(self.shape) <= DENSE_LIMIT:
            return np.diag(self.to_dense()).copy()
        out = np.empty(n)
        e = np.zeros(self.shape[1])
        for i in range(n):
            e[i] = 1.0
            out[i] = self.apply(e)[i]
            e[i] = 0.0
        return out

    def trace(self):
        if self.shape[0] != self.shape[1]:
            raise ShapeError("trace of a non-square operator")
        return float(np.sum(self.diagonal()))

    # algebra
    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return ProductOperator(self, other)
        return self.apply(other)

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=float)
        if other.ndim == 1:
            return self.apply_transpose(other)
        return self.apply_transpose(other.T).T

    def __add__(self, other):
        if isinstance(other, LinearOperator):
            return SumOperator([self, other])
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, LinearOperator):
            return SumOperator([self, ScaledOperator(other, -1.0)])
        return NotImplemented

    def __neg__(self):
        return ScaledOperator(self, -1.0)

    def __mul__(self, c):
        if isinstance(c, numbers.Real):
            return ScaledOperator(self, float(c))
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"<{type(self).__name__} {self.shape[0]}x{self.shape[1]}>"


class DenseOperator(LinearOperator):
    """Wraps a numpy array or a scipy sparse matrix."""

    def __init__(self, matrix, symmetric=None):
        if scipy.sparse.issparse(matrix):
            matrix = scipy.sparse.csr_array(matrix, dtype=float)
        else:
            matrix = np.array(matrix, dtype=float)
            if matrix.ndim != 2:
                raise ShapeError("DenseOperator needs a 2-D array")
        if symmetric is None:
            symmetric = matrix.shape[0] == matrix.shape[1] and _is_symmetric(matrix)
        super().__init__(matrix.shape, symmetric=symmetric)
        self.matrix = matrix

    def _matmat(self, X):
        return np.asarray(self.matrix @ X)

    def _rmatmat(self, X):
        return np.asarray(self.matrix.T @ X)

    def to_dense(self, max_dim=DENSE_LIMIT):
        if max_dim is not None and max(self.shape) > max_dim:
            raise SizeError(f"refusing to densify a {self.shape} operator (limit {max_dim})")
        if scipy.sparse.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix.copy()

    def diagonal(self):
        return np.asarray(self.matrix.diagonal()).copy()


def _is_symmetric(M, rtol=1e-12):
    D = M - M.T
    if scipy.sparse.issparse(D):
        diff = abs(D).max() if D.nnz else 0.0
        scale = abs(M).max() if M.nnz else 0.0
    else:
        diff = np.max(np.abs(D)) if D.size else 0.0
        scale = np.max(np.abs(M)) if M.size else 0.0
    return diff <= rtol * scale + 1e-300


class ScaledIdentity(LinearOperator):
    """``alpha * I`` of size n."""

    def __init__(self, n, alpha=1.0):
        super().__init__((n, n), symmetric=True)
        self.alpha = float(alpha)

    def _matmat(self, X):
        return self.alpha * X

    def diagonal(self):
        return np.full(self.shape[0], self.alpha)

    def trace(self):
        return self.alpha * self.shape[0]


class LowRankUpdate(LinearOperator):
    """``base + U V^T``; symmetric when the caller guarantees it."""

    def __init__(self, base, U, V, symmetric=None):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if U.shape[0] != base.shape[0] or V.shape[0] != base.shape[1] or U.shape[1] != V.shape[1]:
            raise ShapeError(f"low-rank factors {U.shape}, {V.shape} do not fit {base.shape}")
        if symmetric is None:
            symmetric = False
        super().__init__(base.shape, symmetric=symmetric)
        self.base, self.U, self.V = base, U, V
        self._store = None

    @property
    def rank(self):
        return self.U.shape[1]

    def extended(self, U, V):
        """``self + U V^T`` as one flat update.

        Columns live in a shared buffer with doubling capacity, so a chain of
        k appends costs O(nk) overall. Appending to an operator that is no
        longer the newest in its chain copies instead of overwriting.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        r, m = self.rank, U.shape[1]
        store = self._store
        if store is None or store.used != r or store.capacity < r + m:
            store = _ColumnStore(self.shape, max(8, 2 * (r + m)))
            store.put(0, self.U, self.V)
        store.put(r, U, V)
        out = LowRankUpdate(self.base, store.U[:, : r + m], store.V[:, : r + m], symmetric=self.symmetric)
        out._store = store
        return out

    def correction(self, X):
        """Apply only the low-rank part ``U V^T``."""
        return self.U @ (self.V.T @ X)

    def _matmat(self, X):
        return self.base._matmat(X) + self.U @ (self.V.T @ X)

    def _rmatmat(self, X):
        return self.base._rmatmat(X) + self.V @ (self.U.T @ X)

    def diagonal(self):
        return self.base.diagonal() + np.einsum("ij,ij->i", self.U, self.V)

    def trace(self):
        return self.base.trace() + float(np.sum(self.U * self.V))


class _ColumnStore:
    """Append-only column-major storage for the factors of a LowRankUpdate chain."""

    def __init__(self, shape, capacity):
        self.U = np.empty((shape[0], capacity), order="F")
        self.V = np.empty((shape[1], capacity), order="F")
        self.used = 0

    @property
    def capacity(self):
        return self.U.shape[1]

    def put(self, start, U, V):
        stop = start + U.shape[1]
        self.U[:, start:stop] = U
        self.V[:, start:stop] = V
        self.used = stop


class OrthogonalProjection(LinearOperator):
    """Projection onto the orthogonal complement of span(Q) for orthonormal Q."""

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2:
            raise ShapeError("basis block must be 2-D")
        super().__init__((Q.shape[0], Q.shape[0]), symmetric=True)
        self.Q = Q

    def _matmat(self, X):
        return X - self.Q @ (self.Q.T @ X)

    def diagonal(self):
        return 1.0 - np.einsum("ij,ij->i", self.Q, self.Q)

    def trace(self):
        return float(self.shape[0] - self.Q.shape[1])


class SumOperator(LinearOperator):
    def __init__(self, terms):
        terms = list(terms)
        shape = terms[0].shape
        if any(t.shape != shape for t in terms):
            raise ShapeError("summands must share a shape")
        super().__init__(shape, symmetric=all(t.symmetric for t in terms))
        self.terms = terms

    def _matmat(self, X):
        return sum(t._matmat(X) for t in self.terms)

    def _rmatmat(self, X):
        return sum(t._rmatmat(X) for t in self.terms)

    def diagonal(self):
        return sum(t.diagonal() for t in self.terms)

    def trace(self):
        return sum(t.trace() for t in self.terms)


class ScaledOperator(LinearOperator):
    def __init__(self, op, c):
        super().__init__(op.shape, symmetric=op.symmetric)
        self.op, self.c = op, float(c)

    def _matmat(self, X):
        return self.c * self.op._matmat(X)

    def _rmatmat(self, X):
        return self.c * self.op._rmatmat(X)

    def diagonal(self):
        return self.c * self.op.diagonal()

    def trace(self):
        return self.c * self.op.trace()


class ProductOperator(LinearOperator):
    """``left @ right``. Pass ``symmetric=True`` for products like P^T A P."""

    def __init__(self, left, right, symmetric=False):
        if left.shape[1] != right.shape[0]:
            raise ShapeError(f"cannot multiply {left.shape} by {right.shape}")
        super().__init__((left.shape[0], right.shape[1]), symmetric=symmetric)
        self.left, self.right = left, right

    def _matmat(self, X):
        return self.left._matmat(self.right._matmat(X))

    def _rmatmat(self, X):
        return self.right._rmatmat(self.left._rmatmat(X))


class TransposeOperator(LinearOperator):
    def __init__(self, op):
        super().__init__(op.shape[::-1], symmetric=False)
        self.op = op

    def _matmat(self, X):
        return self.op._rmatmat(X)

    def _rmatmat(self, X):
        return self.op._matmat(X)

    @property
    def T(self):
        return self.op


class FunctionOperator(LinearOperator):
    """Operator defined by user callables acting on 1-D vectors."""

    def __init__(self, shape, matvec, rmatvec=None, symmetric=False):
        super().__init__(shape, symmetric=symmetric)
        self._mv, self._rmv = matvec, rmatvec

    def _matmat(self, X):
        return np.column_stack([self._mv(X[:, j]) for j in range(X.shape[1])]) if X.shape[1] else np.zeros((self.shape[0], 0))

    def _rmatmat(self, X):
        if self._rmv is None:
            return super()._rmatmat(X)
        return np.column_stack([self._rmv(X[:, j]) for j in range(X.shape[1])]) if X.shape[1] else np.zeros((self.shape[1], 0))


def aslinearoperator(A):
    """Return ``A`` as a LinearOperator (arrays and sparse matrices are wrapped)."""
    if isinstance(A, LinearOperator):
        return A
    return DenseOperator(A)


def _matmat(A, X):
    if isinstance(A, LinearOperator):
        return A.apply(X)
    return np.asarray(A, dtype=float) @ X


# ---------------------------------------------------------------------------
# symmetric vectorization


def _tri_dim(m):
    n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if n * (n + 1) // 2 != m or m == 0:
        raise ShapeError(f"length {m} is not a triangular number n(n+1)/2")
    return n


def _svec_index(n):
    # column-major lower triangle == row-major upper triangle, transposed
    cols, rows = np.triu_indices(n)
    return rows, cols


def svec(X, tol=1e-10):
    """Pack a symmetric matrix into a vector of length n(n+1)/2."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"svec needs a square matrix, got shape {X.shape}")
    scale = max(np.max(np.abs(X), initial=0.0), 1e-14)
    if np.max(np.abs(X - X.T), initial=0.0) > tol * scale:
        raise PreconditionError("svec input is not symmetric")
    rows, cols = _svec_index(X.shape[0])
    v = X[rows, cols].copy()
    v[rows != cols] *= _SQRT2
    return v


def smat(v):
    """Inverse of :func:`svec`; the result is exactly symmetric."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ShapeError("smat needs a 1-D vector")
    n = _tri_dim(v.size)
    rows, cols = _svec_index(n)
    vals = np.where(rows != cols, v / _SQRT2, v)
    X = np.zeros((n, n))
    X[rows, cols] = vals
    X[cols, rows] = vals
    return X


def sym_kron_apply(A, B, x):
    """Return ``(A ⊗s B) x`` through ``1/2 svec(B X A^T + A X B^T)``."""
    X = smat(x)
    n = X.shape[0]
    for M in (A, B):
        if M.shape != (n, n):
            raise ShapeError(f"factor of shape {M.shape} does not match svec dimension {n}")
    BX = _matmat(B, X)
    M = _matmat(A, BX.T).T
    return svec(0.5 * (M + M.T))


def kron_apply(A, B, x):
    """Return ``(A ⊗ B) vec(X) = vec(B X A^T)`` with column-major vec."""
    A_shape, B_shape = A.shape, B.shape
    x = np.asarray(x, dtype=float)
    if x.size != A_shape[1] * B_shape[1]:
        raise ShapeError("vector length does not match the Kronecker factors")
    X = x.reshape((B_shape[1], A_shape[1]), order="F")
    BX = _matmat(B, X)
    out = _matmat(A, BX.T).T
    return out.reshape(-1, order="F")


def box_apply(A, B, x):
    """Return ``(A ⊠ B) vec(Y) = vec(B Y^T A^T)`` with column-major vec."""
    A_shape, B_shape = A.shape, B.shape
    x = np.asarray(x, dtype=float)
    if x.size != A_shape[1] * B_shape[1]:
        raise ShapeError("vector length does not match the box factors")
    Y = x.reshape((A_shape[1], B_shape[1]), order="F")
    BYt = _matmat(B, Y.T)
    out = _matmat(A, BYt.T).T
    return out.reshape(-1, order="F")


# ---------------------------------------------------------------------------
# projections and factor updates


def orthonormal_basis(S, tol=1e-12):
    """Orthonormal basis of span(S) via column-pivoted QR with a rank check."""
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    n, k = S.shape
    if k == 0:
        return np.zeros((n, 0))
    if k > n:
        raise RankError(f"{k} columns cannot be independent in dimension {n}", column=n)
    Q, R, piv = scipy.linalg.qr(S, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    bad = np.nonzero(d <= tol * max(np.linalg.norm(S, 2), 1e-300))[0]
    if bad.size:
        col = int(piv[bad[0]])
        raise RankError(f"block is rank deficient: column {col} is numerically dependent", column=col)
    return Q


def orthogonal_projection(S):
    """``I - S (S^T S)^{-1} S^T`` as a lazy operator."""
    return OrthogonalProjection(orthonormal_basis(S))


def cholesky_rank1(L, v, sign=1, overwrite=False):
    """Return L' with ``L' L'^T = L L^T + sign v v^T``.

    Downdates that would lose positive definiteness raise DefinitenessError.
    """
    L = np.asarray(L, dtype=float)
    if not overwrite:
        L = L.copy()
    x = np.array(v, dtype=float)
    n = L.shape[0]
    if L.shape != (n, n) or x.shape != (n,):
        raise ShapeError("factor and vector sizes disagree")
    if sign not in (1, -1):
        raise PreconditionError("sign must be +1 or -1")
    for k in range(n):
        lkk = L[k, k]
        r2 = lkk * lkk + sign * x[k] * x[k]
        if r2 <= 0.0 or not np.isfinite(r2):
            raise DefinitenessError("rank-1 downdate destroys positive definiteness")
        r = np.sqrt(r2)
        c, s = r / lkk, x[k] / lkk
        L[k, k] = r
        if k + 1 < n:
            L[k + 1:, k] = (L[k + 1:, k] + sign * s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return L


def rank2_as_two_rank1(u, v):
    """Split ``u v^T + v u^T`` into an update ``p p^T`` and a downdate ``q q^T``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ShapeError("rank-2 factors must have equal length")
    return (u + v) / _SQRT2, (u - v) / _SQRT2


# ---------------------------------------------------------------------------
# probes


def linearity_defect(op, seed=0, trials=3):
    """Largest relative defect of apply(a u + b v) against a apply(u) + b apply(v)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u, v = rng.standard_normal((2, op.shape[1]))
        a, b = rng.standard_normal(2)
        lhs = op.apply(a * u + b * v)
        rhs = a * op.apply(u) + b * op.apply(v)
        scale = max(np.linalg.norm(rhs), abs(a) * np.linalg.norm(op.apply(u)), 1e-14)
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    return worst


def symmetry_defect(op, seed=0, trials=3):
    """Largest relative defect of u^T apply(v) against v^T apply(u)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u, v = rng.standard_normal((2, op.shape[1]))
        Au, Av = op.apply(u), op.apply(v)
        scale = max(np.linalg.norm(u) * np.linalg.norm(Av), np.linalg.norm(v) * np.linalg.norm(Au), 1e-14)
        worst = max(worst, abs(u @ Av - v @ Au) / scale)
    return worst
