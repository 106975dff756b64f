"""Explicit decoupling factor approximation.

Column ``q`` of ``F = -J_ππ⁻¹ J_πp`` is approximated by solving the face system restricted to
a small pattern ``R`` of faces around cell ``q``:

    -(R J_ππ Rᵀ) f̃ = R j,        j = J_πp e_q,

and scattering ``f̃`` back through ``Rᵀ``. Columns are independent, so they are built in a
thread pool when more than one worker is requested. Well columns of ``J_πp`` are empty and
stay empty in ``F̃``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from mhfeflow.bcpr.patterns import pattern_for
from mhfeflow.errors import InvalidArgumentError, PreconditionerBuildError, SingularMatrixError
from mhfeflow.grid import HexMesh
from mhfeflow.linalg.sparse import as_csr, dense_lu_solve, extract_submatrix
from mhfeflow.models import PatternSpec

logger = logging.getLogger(__name__)

# Entries of the Schur approximation smaller than this are dropped as explicit zeros.
SCHUR_DROP = 1e-300


@dataclass
class EDFAColumn:
    """One sparse column of F̃ with its build statistics."""

    rows: np.ndarray
    values: np.ndarray
    solves: int = 0
    fallback: bool = False
    early_stop: bool = False

    @property
    def pattern_size(self) -> int:
        return int(self.rows.size)


@dataclass
class EDFAFactor:
    """``F̃`` (``n_f × (n_E + n_w)``) plus per-column pattern sizes and counters."""

    F: sparse.csr_matrix
    spec: PatternSpec
    pattern_sizes: np.ndarray
    solves: int = 0
    fallbacks: int = 0
    early_stops: int = 0

    @property
    def columns(self) -> int:
        return int(self.pattern_sizes.size)


def _restricted_solve(
    j_pipi: sparse.csr_matrix, j: np.ndarray, pattern: np.ndarray
) -> np.ndarray:
    A = extract_submatrix(j_pipi, pattern, pattern, dense=True)
    return dense_lu_solve(A, -j[pattern])


def _check_support(j: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    support = np.flatnonzero(j)
    if np.setdiff1d(support, pattern, assume_unique=True).size:
        raise InvalidArgumentError("pattern does not contain the non-zeros of the column")
    return support


def edfa_column_static(
    j_pipi: sparse.csr_matrix, j: np.ndarray, pattern: np.ndarray
) -> EDFAColumn:
    """Restricted solve of one column on a fixed ``pattern``.

    A singular restricted matrix falls back to the non-zero support of ``j``; the column is
    flagged. If that is singular too the build fails.
    """
    j = np.asarray(j, dtype=float)
    pattern = np.asarray(pattern, dtype=np.int64)
    support = _check_support(j, pattern)
    if support.size == 0:
        return EDFAColumn(rows=np.zeros(0, dtype=np.int64), values=np.zeros(0))
    try:
        return EDFAColumn(rows=pattern, values=_restricted_solve(j_pipi, j, pattern), solves=1)
    except SingularMatrixError:
        logger.warning("edfa_fallback", extra={"pattern_size": int(pattern.size)})
    try:
        values = _restricted_solve(j_pipi, j, support)
    except SingularMatrixError as exc:
        raise PreconditionerBuildError(
            f"face block restricted to the support of a J_πp column is singular: {exc}",
            row=int(support[0]),
        ) from exc
    return EDFAColumn(rows=support, values=values, solves=2, fallback=True)


def edfa_column_dynamic(
    j_pipi: sparse.csr_matrix,
    j: np.ndarray,
    n_ent: int,
    n_add: int,
    start: Optional[np.ndarray] = None,
) -> EDFAColumn:
    """Grow the pattern from ``start`` by the ``n_add`` largest residual entries per step.

    ``start`` defaults to the non-zero support of ``j``. The loop ends once ``n_ent`` entries
    have been added, or early when the residual vanishes off the pattern.
    """
    if n_ent < 0 or n_add < 1 or (n_ent > 0 and n_add > n_ent):
        raise InvalidArgumentError(
            f"need 0 <= n_ent and 1 <= n_add <= n_ent, got {n_ent}, {n_add}"
        )
    j = np.asarray(j, dtype=float)
    support = np.flatnonzero(j)
    pattern = support if start is None else np.asarray(start, dtype=np.int64)
    _check_support(j, pattern)
    if support.size == 0:
        return EDFAColumn(rows=np.zeros(0, dtype=np.int64), values=np.zeros(0))

    added = 0
    solves = 0
    early = False
    while True:
        f = _restricted_solve(j_pipi, j, pattern)
        solves += 1
        if added >= n_ent:
            break
        r = j + j_pipi[:, pattern] @ f
        r[pattern] = 0.0
        cand = np.flatnonzero(r)
        if cand.size == 0:
            early = True
            break
        take = min(n_add, n_ent - added)
        order = np.lexsort((cand, -np.abs(r[cand])))
        new = cand[order[:take]]
        pattern = np.union1d(pattern, new)
        added += int(new.size)
    return EDFAColumn(rows=pattern, values=f, solves=solves, early_stop=early)


def _gather(columns: list[EDFAColumn], shape: tuple[int, int]) -> sparse.csr_matrix:
    rows = np.concatenate([c.rows for c in columns]) if columns else np.zeros(0, dtype=np.int64)
    vals = np.concatenate([c.values for c in columns]) if columns else np.zeros(0)
    cols = np.repeat(np.arange(len(columns)), [c.rows.size for c in columns])
    keep = vals != 0.0
    F = sparse.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape)
    F.sum_duplicates()
    return F


def build_edfa(
    j_pipi: sparse.spmatrix,
    j_pip: sparse.spmatrix,
    mesh: HexMesh,
    spec: PatternSpec,
    workers: int = 1,
) -> EDFAFactor:
    """Assemble ``F̃`` for every cell column of ``J_πp``."""
    j_pipi = as_csr(j_pipi)
    j_pip = as_csr(j_pip)
    n_f, n_cols = j_pip.shape
    n_e = mesh.n_cells
    if j_pipi.shape != (n_f, n_f) or n_cols < n_e:
        raise InvalidArgumentError(
            f"inconsistent blocks: J_ππ {j_pipi.shape}, J_πp {j_pip.shape}, {n_e} cells"
        )

    if spec.kind == "jacobi":
        d = j_pipi.diagonal()
        zero = np.flatnonzero(d == 0.0)
        if zero.size:
            row = int(zero[0])
            raise PreconditionerBuildError(f"zero diagonal in J_ππ row {row}", row=row)
        F = as_csr(-sparse.diags(1.0 / d) @ j_pip)
        F.eliminate_zeros()
        return EDFAFactor(F=F, spec=spec, pattern_sizes=np.diff(F.tocsc().indptr)[:n_e])

    if spec.kind == "exact":
        rhs = j_pip[:, :n_e].toarray()
        dense = -splu(j_pipi.tocsc()).solve(rhs)
        F = sparse.hstack(
            [sparse.csr_matrix(dense), sparse.csr_matrix((n_f, n_cols - n_e))], format="csr"
        )
        return EDFAFactor(F=F, spec=spec, pattern_sizes=np.full(n_e, n_f), solves=1)

    j_cols = j_pip.tocsc()

    def column(q: int) -> EDFAColumn:
        j = np.zeros(n_f)
        lo, hi = j_cols.indptr[q], j_cols.indptr[q + 1]
        j[j_cols.indices[lo:hi]] = j_cols.data[lo:hi]
        start = pattern_for(mesh, q, spec)
        if spec.kind == "dynamic":
            return edfa_column_dynamic(j_pipi, j, spec.n_ent, spec.n_add, start=start)
        return edfa_column_static(j_pipi, j, start)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(column, range(n_e)))
    else:
        columns = [column(q) for q in range(n_e)]

    factor = EDFAFactor(
        F=_gather(columns, (n_f, n_cols)),
        spec=spec,
        pattern_sizes=np.array([c.pattern_size for c in columns], dtype=np.int64),
        solves=sum(c.solves for c in columns),
        fallbacks=sum(c.fallback for c in columns),
        early_stops=sum(c.early_stop for c in columns),
    )
    if factor.fallbacks:
        logger.warning("edfa_fallbacks", extra={"count": factor.fallbacks, "pattern": spec.label})
    return factor


def schur_approx(
    j_pp: sparse.spmatrix, j_ppi: sparse.spmatrix, F: sparse.spmatrix
) -> sparse.csr_matrix:
    """``S̃ = J_pp + J_pπ F̃`` with only sub-``SCHUR_DROP`` entries removed."""
    if j_ppi.shape[1] != F.shape[0] or j_pp.shape != (j_ppi.shape[0], F.shape[1]):
        raise InvalidArgumentError(
            f"cannot form J_pp {j_pp.shape} + J_pπ {j_ppi.shape} F̃ {F.shape}"
        )
    S = as_csr(as_csr(j_pp) + as_csr(j_ppi) @ as_csr(F))
    S.data[np.abs(S.data) < SCHUR_DROP] = 0.0
    S.eliminate_zeros()
    return S


def _ones(A: sparse.spmatrix) -> sparse.csr_matrix:
    B = sparse.csr_matrix(A, copy=True)
    B.sum_duplicates()
    B.data = np.ones_like(B.data)
    return B


def schur_structure_nnz(
    j_pp: sparse.spmatrix, j_ppi: sparse.spmatrix, F_pattern: sparse.spmatrix
) -> int:
    """Non-zeros of ``J_pp + J_pπ F`` counted on sparsity patterns alone (no cancellation)."""
    return int((_ones(j_pp) + _ones(j_ppi) @ _ones(F_pattern)).nnz)
