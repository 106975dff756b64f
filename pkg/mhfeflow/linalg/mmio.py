"""Matrix Market coordinate I/O (real, general)."""

from __future__ import annotations

from pathlib import Path

import scipy.io
import scipy.sparse as sp

from mhfeflow.linalg.sparse import as_csr

# Significant digits written per value; enough for an exact double round trip.
MM_PRECISION = 17


def write_matrix_market(A: sp.spmatrix, path: str | Path, comment: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(
        str(path),
        sp.coo_matrix(A),
        comment=comment,
        field="real",
        precision=MM_PRECISION,
        symmetry="general",
    )
    return path


def read_matrix_market(path: str | Path) -> sp.csr_matrix:
    return as_csr(scipy.io.mmread(str(path)))
