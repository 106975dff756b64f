"""Plain-aggregation algebraic multigrid.

Strength of connection ``|a_ij| >= θ sqrt(|a_ii a_jj|)`` on the symmetrized graph, greedy
aggregation, piecewise-constant prolongation, Galerkin coarse operators and a damped-Jacobi
V(1,1) cycle. The coarsest level is solved with a dense LU factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from mhfeflow.errors import PreconditionerBuildError
from mhfeflow.linalg.sparse import as_csr
from mhfeflow.models import AMGSettings

logger = logging.getLogger(__name__)


@dataclass
class AMGLevel:
    A: sp.csr_matrix
    P: sp.csr_matrix
    aggregates: np.ndarray
    inv_diag: np.ndarray


@dataclass
class AMGHierarchy:
    """Levels from fine to coarse plus the coarsest operator."""

    levels: list[AMGLevel]
    coarse: sp.csr_matrix
    coarse_inv_diag: np.ndarray
    omega: float
    coarse_lu: Optional[tuple[np.ndarray, np.ndarray]] = None
    stagnated: bool = False
    sizes: list[int] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.levels) + 1

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return amg_vcycle(self, r)


def strength_graph(A: sp.csr_matrix, theta: float) -> sp.csr_matrix:
    """Symmetric boolean graph of strong off-diagonal couplings, weighted by ``|a_ij|``."""
    C = A.tocoo()
    d = np.abs(A.diagonal())
    off = C.row != C.col
    row, col, val = C.row[off], C.col[off], np.abs(C.data[off])
    strong = val >= theta * np.sqrt(d[row] * d[col])
    S = sp.csr_matrix((val[strong], (row[strong], col[strong])), shape=A.shape)
    S = S.maximum(S.T).tocsr()
    S.eliminate_zeros()
    S.sort_indices()
    return S


def aggregate(S: sp.csr_matrix) -> tuple[np.ndarray, int]:
    """Greedy aggregation over the strength graph.

    1. A node whose strong neighbours are all free becomes a root; it takes them all.
    2. Free nodes join the aggregate of their strongest aggregated neighbour.
    3. Whatever is left forms new aggregates with its free neighbours, or a singleton.
    """
    n = S.shape[0]
    indptr, indices, weights = S.indptr, S.indices, S.data
    agg = np.full(n, -1, dtype=np.int64)
    n_agg = 0

    for i in range(n):
        nbrs = indices[indptr[i] : indptr[i + 1]]
        if agg[i] == -1 and np.all(agg[nbrs] == -1):
            agg[i] = n_agg
            agg[nbrs] = n_agg
            n_agg += 1

    for i in np.flatnonzero(agg == -1):
        nbrs = indices[indptr[i] : indptr[i + 1]]
        w = weights[indptr[i] : indptr[i + 1]]
        taken = agg[nbrs] >= 0
        if np.any(taken):
            best = nbrs[taken][np.argmax(w[taken])]
            agg[i] = -2 - agg[best]  # provisional: pass-2 nodes never attract each other
    provisional = agg <= -2
    agg[provisional] = -2 - agg[provisional]

    for i in range(n):
        if agg[i] == -1:
            nbrs = indices[indptr[i] : indptr[i + 1]]
            free = nbrs[agg[nbrs] == -1]
            agg[i] = n_agg
            agg[free] = n_agg
            n_agg += 1
    return agg, n_agg


def _inverse_diagonal(A: sp.csr_matrix, level: int) -> np.ndarray:
    d = A.diagonal()
    bad = np.flatnonzero(~(np.abs(d) >= 1e-300))
    if bad.size:
        row = int(bad[0])
        raise PreconditionerBuildError(
            f"AMG level {level}: zero diagonal entry in row {row}", row=row
        )
    return 1.0 / d


def amg_setup(A: sp.spmatrix, settings: Optional[AMGSettings] = None) -> AMGHierarchy:
    """Build the aggregation hierarchy for ``A``."""
    settings = settings or AMGSettings()
    current = as_csr(A)
    levels: list[AMGLevel] = []
    sizes = [current.shape[0]]
    stagnated = False

    while current.shape[0] > settings.max_coarse and len(levels) < settings.max_levels - 1:
        n = current.shape[0]
        agg, n_agg = aggregate(strength_graph(current, settings.theta))
        if n_agg >= n:
            stagnated = True
            logger.warning("amg_stagnated", extra={"level": len(levels), "size": n})
            break
        P = sp.csr_matrix((np.ones(n), (np.arange(n), agg)), shape=(n, n_agg))
        inv_diag = _inverse_diagonal(current, len(levels))
        levels.append(AMGLevel(A=current, P=P, aggregates=agg, inv_diag=inv_diag))
        current = as_csr(P.T @ current @ P)
        sizes.append(n_agg)

    coarse_lu = None
    if current.shape[0] <= settings.max_coarse:
        coarse_lu = sla.lu_factor(current.toarray(), check_finite=False)
    hierarchy = AMGHierarchy(
        levels=levels,
        coarse=current,
        coarse_inv_diag=(
            _inverse_diagonal(current, len(levels)) if coarse_lu is None else np.ones(0)
        ),
        omega=settings.omega,
        coarse_lu=coarse_lu,
        stagnated=stagnated,
        sizes=sizes,
    )
    logger.debug("amg_setup", extra={"sizes": sizes, "stagnated": stagnated})
    return hierarchy


def amg_vcycle(H: AMGHierarchy, r: np.ndarray) -> np.ndarray:
    """One V(1,1) cycle from a zero initial guess: an approximation of ``A⁻¹ r``."""
    return _cycle(H, 0, np.asarray(r, dtype=float))


def _cycle(H: AMGHierarchy, level: int, b: np.ndarray) -> np.ndarray:
    if level == len(H.levels):
        if H.coarse_lu is not None:
            return sla.lu_solve(H.coarse_lu, b, check_finite=False)
        return H.omega * H.coarse_inv_diag * b
    lev = H.levels[level]
    x = H.omega * lev.inv_diag * b
    x += lev.P @ _cycle(H, level + 1, lev.P.T @ (b - lev.A @ x))
    x += H.omega * lev.inv_diag * (b - lev.A @ x)
    return x
