"""Sparse and small dense kernels shared by every other module.

Matrices are ``scipy.sparse.csr_matrix`` objects kept in canonical form:
sorted, duplicate-free column indices within each row. Structural zeros are
kept; only construction merges duplicates.
"""
from __future__ import annotations

import warnings

import numba as nb
import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "SingularMatrixError",
    "csr",
    "check_csr",
    "spmv",
    "transpose",
    "galerkin_product",
    "diag_of",
    "row_sums",
    "lcg_uniform",
    "signed_dominant_eig",
    "dense_lu_solve",
    "DenseLU",
    "read_matrix_market",
    "write_matrix_market",
]


class SingularMatrixError(ValueError):
    """Raised when a pivot of the dense LU is numerically zero."""


def csr(data, shape=None) -> sp.csr_matrix:
    """Build a canonical CSR matrix.

    ``data`` is anything ``scipy.sparse.csr_matrix`` accepts, e.g. a dense
    array, ``(values, (rows, cols))`` triplets or another sparse matrix.
    Duplicate ``(row, col)`` pairs are summed.
    """
    A = sp.csr_matrix(data, shape=shape, dtype=np.float64)
    A.sum_duplicates()  # also sorts indices
    return A


def check_csr(A: sp.csr_matrix) -> None:
    """Assert the canonical-CSR invariants; raises ``AssertionError``."""
    ptr, idx = A.indptr, A.indices
    assert ptr[0] == 0
    assert np.all(np.diff(ptr) >= 0)
    assert ptr[-1] == len(A.data) == len(idx)
    if len(idx):
        assert idx.min() >= 0 and idx.max() < A.shape[1]
    rows = np.repeat(np.arange(A.shape[0]), np.diff(ptr))
    same_row = rows[1:] == rows[:-1]
    assert np.all(idx[1:][same_row] > idx[:-1][same_row]), "unsorted or duplicate columns"
    assert not np.isnan(A.data).any()


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector {x.shape[0]}")
    # scipy's csr kernel accumulates each row left to right in stored order
    return A @ x


def transpose(A: sp.csr_matrix) -> sp.csr_matrix:
    return csr(A.T)


def galerkin_product(P: sp.csr_matrix, A: sp.csr_matrix) -> sp.csr_matrix:
    """Return ``P^T A P``."""
    if A.shape[0] != A.shape[1] or P.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: P {P.shape}, A {A.shape}")
    AP = A @ P
    return csr(transpose(P) @ AP)


def diag_of(A: sp.csr_matrix) -> np.ndarray:
    """Diagonal of a square matrix; a missing structural diagonal reads as 0."""
    if A.shape[0] != A.shape[1]:
        raise ValueError("diag_of requires a square matrix")
    return A.diagonal().astype(np.float64)


@nb.njit(cache=True)
def _row_sums(indptr, data):
    n = len(indptr) - 1
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k]
        out[i] = s
    return out


def row_sums(A: sp.csr_matrix) -> np.ndarray:
    """Row sums accumulated left to right in stored-index order."""
    return _row_sums(A.indptr, A.data)


def lcg_uniform(n: int, seed: int = 42) -> np.ndarray:
    """Deterministic uniform(-1, 1) vector from a 64-bit LCG (Knuth MMIX constants)."""
    out = np.empty(n)
    state = seed & 0xFFFFFFFFFFFFFFFF
    for i in range(n):
        state = (6364136223846793005 * state + 1442695040888963407) & 0xFFFFFFFFFFFFFFFF
        out[i] = (state >> 11) / float(1 << 53) * 2.0 - 1.0
    return out


def signed_dominant_eig(A: sp.csr_matrix, diag: np.ndarray | None = None,
                        iterations: int = 15, seed: int = 42) -> float:
    """Power-iteration estimate of the dominant eigenvalue of ``D^{-1} A``.

    ``D`` is ``diag`` if given, else the diagonal of ``A``. The signed
    Rayleigh quotient of the final iterate is returned without clamping, so a
    negative estimate comes back negative.
    """
    d = diag_of(A) if diag is None else np.asarray(diag, dtype=np.float64)
    zero = np.flatnonzero(d == 0.0)
    if len(zero):
        raise ZeroDivisionError(f"zero diagonal entry in row {zero[0]} ({len(zero)} rows total)")
    dinv = 1.0 / d
    x = lcg_uniform(A.shape[0], seed)
    x /= np.linalg.norm(x)
    for _ in range(iterations):
        y = dinv * (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    return float(x @ (dinv * (A @ x)) / (x @ x))


class DenseLU:
    """Partial-pivoting LU factorization of a small sparse matrix."""

    def __init__(self, A, max_rows: int = 5000, pivot_tol: float = 1e-14):
        n, m = A.shape
        if n != m:
            raise ValueError("dense LU requires a square matrix")
        if n > max_rows:
            raise ValueError(f"matrix with {n} rows exceeds the dense LU cap of {max_rows}")
        M = A.toarray() if sp.issparse(A) else np.array(A, dtype=np.float64)
        scale = np.abs(M).max() if M.size else 0.0
        with warnings.catch_warnings():
            # singularity is reported below with the offending pivot
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
        pivots = np.abs(np.diag(lu))
        bad = np.flatnonzero(pivots <= pivot_tol * scale) if n else []
        if scale == 0.0 or len(bad):
            row = int(bad[0]) if len(bad) else 0
            raise SingularMatrixError(f"singular pivot at step {row}")
        self.lu, self.piv = lu, piv

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve((self.lu, self.piv), b)


def dense_lu_solve(A, b, max_rows: int = 5000) -> np.ndarray:
    return DenseLU(A, max_rows=max_rows).solve(np.asarray(b, dtype=np.float64))


def write_matrix_market(path, A: sp.spmatrix) -> None:
    """Write ``A`` in coordinate/real/general format with 17 significant digits."""
    A = csr(A)
    coo = A.tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def read_matrix_market(path) -> sp.csr_matrix:
    """Read a coordinate-format Matrix Market file (general or symmetric)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) < 5 or header[0] != "%%MatrixMarket" or header[2] != "coordinate":
            raise ValueError(f"{path}: not a coordinate Matrix Market file")
        symmetry = header[4].lower()
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(t) for t in line.split())
        body = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
    rows = body[:, 0].astype(np.int64) - 1
    cols = body[:, 1].astype(np.int64) - 1
    vals = body[:, 2] if body.shape[1] > 2 else np.ones(len(rows))
    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return csr((vals, (rows, cols)), shape=(nrows, ncols))
