"""Classical one-level preconditioners: Jacobi and ILU(0), with reverse Cuthill-McKee ordering."""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import spsolve_triangular

from mhfeflow.errors import PreconditionerBuildError
from mhfeflow.linalg.sparse import as_csr

TINY_PIVOT = 1e-300


class JacobiPreconditioner:
    """Inverse of the diagonal."""

    def __init__(self, A: sp.spmatrix) -> None:
        d = np.asarray(A.diagonal(), dtype=float)
        bad = np.flatnonzero(~(np.abs(d) >= TINY_PIVOT))
        if bad.size:
            row = int(bad[0])
            raise PreconditionerBuildError(f"zero diagonal entry in row {row}", row=row)
        self.inv_diag = 1.0 / d

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.inv_diag * x


def jacobi_build(A: sp.spmatrix) -> JacobiPreconditioner:
    return JacobiPreconditioner(A)


class ILU0Preconditioner:
    """Zero-fill incomplete LU on the pattern of ``A`` (optionally symmetrically permuted).

    ``L`` is unit lower triangular and ``U`` upper triangular; together they occupy exactly the
    sparsity pattern of the (permuted) input.
    """

    def __init__(self, A: sp.spmatrix, perm: Optional[np.ndarray] = None) -> None:
        B = as_csr(A)
        self.perm = None if perm is None else np.asarray(perm, dtype=np.int64)
        if self.perm is not None:
            B = as_csr(B[self.perm][:, self.perm])
        self.L, self.U = _ilu0_factor(B)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        b = x if self.perm is None else x[self.perm]
        y = spsolve_triangular(self.L, b, lower=True, unit_diagonal=True)
        z = spsolve_triangular(self.U, y, lower=False)
        if self.perm is None:
            return z
        out = np.empty_like(z)
        out[self.perm] = z
        return out


def ilu0_build(A: sp.spmatrix, perm: Optional[np.ndarray] = None) -> ILU0Preconditioner:
    return ILU0Preconditioner(A, perm=perm)


def rcm_permutation(A: sp.spmatrix) -> np.ndarray:
    """Reverse Cuthill-McKee ordering of the symmetrized pattern of ``A``."""
    pattern = as_csr(abs(A) + abs(A.T))
    return np.asarray(reverse_cuthill_mckee(pattern, symmetric_mode=True), dtype=np.int64)


def _ilu0_factor(A: sp.csr_matrix) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    n = A.shape[0]
    indptr, indices = A.indptr, A.indices
    data = A.data.copy()

    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        hit = np.flatnonzero(indices[indptr[i] : indptr[i + 1]] == i)
        if hit.size == 0:
            raise PreconditionerBuildError(f"no diagonal entry stored in row {i}", row=i)
        diag_pos[i] = indptr[i] + hit[0]

    where = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        cols = indices[start:end]
        where[cols] = np.arange(start, end)
        for pos in range(start, diag_pos[i]):
            k = indices[pos]
            pivot = data[diag_pos[k]]
            if abs(pivot) < TINY_PIVOT:
                raise PreconditionerBuildError(f"zero pivot in row {k}", row=int(k))
            data[pos] /= pivot
            lik = data[pos]
            for pk in range(diag_pos[k] + 1, indptr[k + 1]):
                target = where[indices[pk]]
                if target >= 0:
                    data[target] -= lik * data[pk]
        where[cols] = -1
        if abs(data[diag_pos[i]]) < TINY_PIVOT:
            raise PreconditionerBuildError(f"zero pivot in row {i}", row=i)

    factored = sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=A.shape)
    L = sp.tril(factored, k=-1, format="csr")
    U = sp.triu(factored, k=0, format="csr")
    return L, U
