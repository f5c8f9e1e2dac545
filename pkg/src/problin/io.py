"""Readers for Matrix Market matrices and CSV point clouds."""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .errors import InputFormatError

_FIELDS = ("real", "integer", "double")
_SYMMETRIES = ("general", "symmetric")


def iter_lines(path):
    """Yield ``(byte_offset, text)`` for each line of a file."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputFormatError(f"cannot open file ({exc.strerror})", path, 0) from exc
    with fh:
        offset = 0
        for raw in fh:
            try:
                text = raw.decode("ascii")
            except UnicodeDecodeError as exc:
                raise InputFormatError("non-ASCII content", path, offset + exc.start) from exc
            yield offset, text.strip()
            offset += len(raw)


def _numbers(text, count, kind, path, offset):
    parts = text.split()
    if len(parts) != count:
        raise InputFormatError(f"expected {count} fields, found {len(parts)}", path, offset)
    try:
        return [kind(p) for p in parts]
    except ValueError as exc:
        raise InputFormatError(f"malformed number in {text!r}", path, offset) from exc


def read_matrix_market(path):
    """Read a real Matrix Market file.

    Coordinate files return CSR matrices and array files return dense arrays.
    Symmetric files may store either triangle; the other is mirrored in.
    """
    path = os.fspath(path)
    lines = iter_lines(path)
    try:
        offset, header = next(lines)
    except StopIteration:
        raise InputFormatError("empty file", path, 0) from None
    tokens = header.lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise InputFormatError("missing '%%MatrixMarket matrix' banner", path, offset)
    layout, field, symmetry = tokens[2:]
    if layout not in ("coordinate", "array"):
        raise InputFormatError(f"unsupported layout {layout!r}", path, offset)
    if field not in _FIELDS:
        raise InputFormatError(f"unsupported field {field!r}; only real data is read", path, offset)
    if symmetry not in _SYMMETRIES:
        raise InputFormatError(f"unsupported symmetry {symmetry!r}", path, offset)

    body = ((o, t) for o, t in lines if t and not t.startswith("%"))
    try:
        offset, size_line = next(body)
    except StopIteration:
        raise InputFormatError("missing size line", path, offset) from None
    if layout == "coordinate":
        nrows, ncols, nnz = _numbers(size_line, 3, int, path, offset)
    else:
        nrows, ncols = _numbers(size_line, 2, int, path, offset)
    if symmetry == "symmetric" and nrows != ncols:
        raise InputFormatError("symmetric matrix must be square", path, offset)

    if layout == "array":
        vals = []
        for offset, text in body:
            vals.append(_numbers(text, 1, float, path, offset)[0])
        if symmetry == "general":
            if len(vals) != nrows * ncols:
                raise InputFormatError(f"expected {nrows * ncols} values, found {len(vals)}", path, offset)
            return np.array(vals).reshape((ncols, nrows)).T
        n = nrows
        if len(vals) != n * (n + 1) // 2:
            raise InputFormatError(f"expected {n * (n + 1) // 2} values, found {len(vals)}", path, offset)
        M = np.zeros((n, n))
        rows, cols = np.tril_indices(n)
        order = np.lexsort((rows, cols))  # column-major lower triangle
        M[rows[order], cols[order]] = vals
        return M + np.tril(M, -1).T

    I = np.empty(nnz, dtype=np.int64)
    J = np.empty(nnz, dtype=np.int64)
    V = np.empty(nnz)
    count = 0
    for offset, text in body:
        if count == nnz:
            raise InputFormatError(f"more than {nnz} entries", path, offset)
        parts = text.split()
        if len(parts) != 3:
            raise InputFormatError(f"expected 3 fields, found {len(parts)}", path, offset)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise InputFormatError(f"malformed entry {text!r}", path, offset) from exc
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise InputFormatError(f"index ({i}, {j}) outside {nrows} x {ncols}", path, offset)
        I[count], J[count], V[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise InputFormatError(f"expected {nnz} entries, found {count}", path, offset)
    if symmetry == "symmetric":
        off = I != J
        I, J, V = np.concatenate([I, J[off]]), np.concatenate([J, I[off]]), np.concatenate([V, V[off]])
    return sp.csr_matrix((V, (I, J)), shape=(nrows, ncols))


def read_points_csv(path):
    """One point per row, comma separated; a non-numeric first line is a header."""
    path = os.fspath(path)
    rows = []
    width = None
    for lineno, (offset, text) in enumerate(iter_lines(path)):
        if not text:
            continue
        fields = [f.strip() for f in text.split(",")]
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            if lineno == 0:
                continue
            raise InputFormatError(f"non-numeric field in {text!r}", path, offset) from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputFormatError(f"expected {width} columns, found {len(row)}", path, offset)
        rows.append(row)
    if not rows:
        raise InputFormatError("no data rows", path, 0)
    return np.array(rows)
