"""Block CPR preconditioning with EDFA approximations of the Schur complement."""

from mhfeflow.bcpr.edfa import (
    EDFAColumn,
    EDFAFactor,
    build_edfa,
    edfa_column_dynamic,
    edfa_column_static,
    schur_approx,
    schur_structure_nnz,
)
from mhfeflow.bcpr.patterns import pattern_for, static_pattern
from mhfeflow.bcpr.preconditioner import (
    BCPRCache,
    BCPRPreconditioner,
    apply_bcpr,
    apply_second_stage,
    build_bcpr,
)

__all__ = [
    "BCPRCache",
    "BCPRPreconditioner",
    "EDFAColumn",
    "EDFAFactor",
    "apply_bcpr",
    "apply_second_stage",
    "build_bcpr",
    "build_edfa",
    "edfa_column_dynamic",
    "edfa_column_static",
    "pattern_for",
    "schur_approx",
    "schur_structure_nnz",
    "static_pattern",
]
