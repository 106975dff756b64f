"""Block CPR preconditioner.

Two multiplicative stages with the global stage first:

1. ``v = M₁ w`` with ``M₁`` the inverse diagonal of the whole Jacobian,
2. ``r = w - J v``,
3. ``v += M₂ r``, where ``M₂`` acts on the ``[π; p]`` part only through a block LDU
   factorization of ``J_PP`` whose Schur complement is replaced by ``S̃ = J_pp + J_pπ F̃``.

The ``J_ππ`` solves are single AMG V-cycles and the ``S̃`` solve is AMG-preconditioned GCR to
a loose tolerance.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from mhfeflow.bcpr.edfa import EDFAFactor, build_edfa, schur_approx, schur_structure_nnz
from mhfeflow.discretization.assembly import BlockJacobian
from mhfeflow.errors import InvalidArgumentError, NumericError
from mhfeflow.grid import HexMesh
from mhfeflow.linalg.amg import AMGHierarchy, amg_setup
from mhfeflow.linalg.krylov import gcr
from mhfeflow.linalg.precond import jacobi_build
from mhfeflow.models import BuildReport, PatternSpec, PreconditionerSettings

logger = logging.getLogger(__name__)

Solve = Callable[[np.ndarray], np.ndarray]


@dataclass
class BCPRCache:
    """Holds the ``J_ππ`` hierarchy and ``F̃`` between builds of the same run.

    Entries are valid while the face block is the same object with the same pattern spec;
    assembly hands out the model's constant ``J_ππ``, so this holds for a whole run.
    """

    source: Optional[sparse.csr_matrix] = None
    spec: Optional[PatternSpec] = None
    amg_pi: Optional[AMGHierarchy] = None
    edfa: Optional[EDFAFactor] = None
    hits: int = 0

    def lookup(self, j_pipi: sparse.csr_matrix, spec: PatternSpec) -> bool:
        return self.source is j_pipi and self.spec == spec and self.edfa is not None

    def store(
        self, j_pipi: sparse.csr_matrix, spec: PatternSpec, amg_pi: AMGHierarchy, edfa: EDFAFactor
    ) -> None:
        self.source, self.spec, self.amg_pi, self.edfa = j_pipi, spec, amg_pi, edfa

    def clear(self) -> None:
        self.source = self.spec = self.amg_pi = self.edfa = None
        self.hits = 0


@dataclass
class BCPRPreconditioner:
    """Built BCPR operator; call it on a full-size vector."""

    jacobian: BlockJacobian
    matrix: sparse.csr_matrix
    inv_diag: np.ndarray
    amg_pi: AMGHierarchy
    edfa: EDFAFactor
    schur: sparse.csr_matrix
    amg_schur: AMGHierarchy
    tau_inner: float
    inner_maxit: int
    report: BuildReport
    solve_pi: Optional[Solve] = None
    precond_schur: Optional[Solve] = None
    inner_failures: int = 0
    inner_iterations: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if self.solve_pi is None:
            self.solve_pi = self.amg_pi
        if self.precond_schur is None:
            self.precond_schur = self.amg_schur

    @property
    def r_s(self) -> float:
        return self.report.r_s

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return apply_bcpr(self, w)


def _check(v: np.ndarray, stage: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite values after the {stage} stage", stage=stage)
    return v


def build_bcpr(
    jacobian: BlockJacobian,
    mesh: HexMesh,
    settings: Optional[PreconditionerSettings] = None,
    *,
    gravity: bool = False,
    cache: Optional[BCPRCache] = None,
) -> BCPRPreconditioner:
    """Build ``M₁``, the ``J_ππ`` hierarchy, ``F̃``, ``S̃`` and its hierarchy.

    With gravity off, ``settings.reuse`` and a ``cache``, the ``J_ππ`` hierarchy and ``F̃``
    are taken from the cache when it matches and stored there otherwise. ``S̃`` and its
    hierarchy are always rebuilt.
    """
    settings = settings or PreconditionerSettings()
    spec = settings.pattern
    t0 = time.perf_counter()

    matrix = jacobian.to_csr()
    inv_diag = jacobi_build(matrix).inv_diag

    use_cache = cache is not None and settings.reuse and not gravity
    reused = use_cache and cache.lookup(jacobian.pipi, spec)
    t_edfa = t_amg = 0.0
    if reused:
        amg_pi, edfa = cache.amg_pi, cache.edfa
        cache.hits += 1
    else:
        t = time.perf_counter()
        amg_pi = amg_setup(jacobian.pipi, settings.amg)
        t_amg += time.perf_counter() - t
        t = time.perf_counter()
        edfa = build_edfa(jacobian.pipi, jacobian.pip, mesh, spec, workers=settings.workers)
        t_edfa = time.perf_counter() - t
        if use_cache:
            cache.store(jacobian.pipi, spec, amg_pi, edfa)

    schur = schur_approx(jacobian.pp, jacobian.ppi, edfa.F)
    t = time.perf_counter()
    amg_schur = amg_setup(schur, settings.amg)
    t_amg += time.perf_counter() - t

    nnz = schur_structure_nnz(jacobian.pp, jacobian.ppi, edfa.F)
    nnz_orig = schur_structure_nnz(jacobian.pp, jacobian.ppi, jacobian.pip)
    sizes = edfa.pattern_sizes
    report = BuildReport(
        pattern=spec.label,
        r_s=nnz / nnz_orig if nnz_orig else 1.0,
        nnz_schur=nnz,
        nnz_schur_orig=nnz_orig,
        columns=edfa.columns,
        mean_pattern_size=float(sizes.mean()) if sizes.size else 0.0,
        max_pattern_size=int(sizes.max()) if sizes.size else 0,
        restricted_solves=edfa.solves,
        fallbacks=edfa.fallbacks,
        early_stops=edfa.early_stops,
        reused=bool(reused),
        amg_levels_pi=list(amg_pi.sizes),
        amg_levels_schur=list(amg_schur.sizes),
        amg_stagnated=amg_pi.stagnated or amg_schur.stagnated,
        t_edfa=t_edfa,
        t_amg=t_amg,
        t_setup=time.perf_counter() - t0,
    )
    logger.debug("bcpr_built", extra=report.model_dump(include={"pattern", "r_s", "reused"}))
    return BCPRPreconditioner(
        jacobian=jacobian,
        matrix=matrix,
        inv_diag=inv_diag,
        amg_pi=amg_pi,
        edfa=edfa,
        schur=schur,
        amg_schur=amg_schur,
        tau_inner=settings.tau_inner,
        inner_maxit=settings.inner_maxit,
        report=report,
    )


def apply_second_stage(
    P: BCPRPreconditioner, r_pi: np.ndarray, r_p: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Block LDU solve of the pressure subproblem; the saturation correction is zero."""
    J = P.jacobian
    t_pi = P.solve_pi(r_pi)
    t_p = r_p - J.ppi @ t_pi
    inner = gcr(
        lambda x: P.schur @ x,
        t_p,
        apply_M=P.precond_schur,
        tol=P.tau_inner,
        maxit=P.inner_maxit,
    )
    with P._lock:
        P.inner_iterations += inner.iterations
        if not inner.converged:
            P.inner_failures += 1
    if not inner.converged:
        logger.debug(
            "schur_inner_unconverged",
            extra={"iterations": inner.iterations, "relres": inner.relative_residual},
        )
    dv_p = inner.x
    dv_pi = P.solve_pi(r_pi - J.pip @ dv_p)
    return dv_pi, dv_p


def apply_bcpr(P: BCPRPreconditioner, w: np.ndarray) -> np.ndarray:
    """Global Jacobi sweep, residual update, then the pressure block stage."""
    w = np.asarray(w, dtype=float)
    if w.shape != (P.matrix.shape[0],):
        raise InvalidArgumentError(
            f"vector of length {w.size} does not match system size {P.matrix.shape[0]}"
        )
    v = _check(P.inv_diag * w, "global")
    r = w - P.matrix @ v
    n_f, n_p, _ = P.jacobian.sizes
    dv_pi, dv_p = apply_second_stage(P, r[:n_f], r[n_f : n_f + n_p])
    v[:n_f] += dv_pi
    v[n_f : n_f + n_p] += dv_p
    return _check(v, "pressure")
