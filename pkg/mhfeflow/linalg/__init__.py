"""Sparse kernels, Krylov solvers, one-level preconditioners and aggregation AMG."""

from mhfeflow.linalg.amg import AMGHierarchy, amg_setup, amg_vcycle
from mhfeflow.linalg.krylov import KrylovResult, gcr, gmres
from mhfeflow.linalg.mmio import read_matrix_market, write_matrix_market
from mhfeflow.linalg.precond import (
    ILU0Preconditioner,
    JacobiPreconditioner,
    ilu0_build,
    jacobi_build,
    rcm_permutation,
)
from mhfeflow.linalg.sparse import (
    as_csr,
    dense_lu_solve,
    extract_diag,
    extract_submatrix,
    spmv,
    structural_nnz,
    transpose,
)

__all__ = [
    "AMGHierarchy",
    "ILU0Preconditioner",
    "JacobiPreconditioner",
    "KrylovResult",
    "amg_setup",
    "amg_vcycle",
    "as_csr",
    "dense_lu_solve",
    "extract_diag",
    "extract_submatrix",
    "gcr",
    "gmres",
    "ilu0_build",
    "jacobi_build",
    "rcm_permutation",
    "read_matrix_market",
    "spmv",
    "structural_nnz",
    "transpose",
    "write_matrix_market",
]
