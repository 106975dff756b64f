"""Sparse kernels and small dense solves."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from mhfeflow.errors import InvalidArgumentError, SingularMatrixError

# Pivots below this fraction of the largest entry count as zero.
PIVOT_RTOL = 1e-14


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR copy: duplicates summed, column indices sorted per row."""
    out = sp.csr_matrix(A, dtype=float, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise InvalidArgumentError(f"vector of length {x.size} does not match {A.shape}")
    return A @ x


def transpose(A: sp.spmatrix) -> sp.csr_matrix:
    return as_csr(A.T)


def extract_diag(A: sp.spmatrix) -> np.ndarray:
    return np.asarray(A.diagonal(), dtype=float)


def extract_submatrix(A: sp.spmatrix, rows, cols, dense: bool = False):
    """Rows and columns of ``A`` in the requested order."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    m, n = A.shape
    if rows.size and (rows.min() < 0 or rows.max() >= m):
        raise InvalidArgumentError(f"row index out of range for {m} rows")
    if cols.size and (cols.min() < 0 or cols.max() >= n):
        raise InvalidArgumentError(f"column index out of range for {n} columns")
    sub = sp.csr_matrix(A)[rows][:, cols]
    return sub.toarray() if dense else as_csr(sub)


def structural_nnz(A: sp.spmatrix) -> int:
    """Stored non-zeros after merging duplicates, explicit zeros included."""
    B = sp.csr_matrix(A, copy=True)
    B.sum_duplicates()
    return int(B.nnz)


def dense_lu_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a small dense system with partial-pivoting LU.

    Raises
    ------
    SingularMatrixError
        When a pivot falls below ``PIVOT_RTOL`` times the largest entry of ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"dense_lu_solve needs a square matrix, got {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots <= PIVOT_RTOL * scale)
    if bad.size:
        n = A.shape[0]
        raise SingularMatrixError(f"zero pivot in column {int(bad[0])} of a {n}x{n} system")
    return sla.lu_solve((lu, piv), np.asarray(b, dtype=float), check_finite=False)
