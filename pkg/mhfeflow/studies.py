"""Solver studies on a single linear system: global-stage comparison, per-block AMG
solvability and EDFA pattern sweeps."""

from __future__ import annotations

import logging
import time
from typing import Dict, Iterable, Optional

import numpy as np

from mhfeflow.bcpr.edfa import build_edfa, schur_approx
from mhfeflow.bcpr.preconditioner import build_bcpr
from mhfeflow.discretization.assembly import (
    BlockJacobian,
    assemble_jacobian,
    assemble_residual,
)
from mhfeflow.errors import InvalidArgumentError, PreconditionerBuildError
from mhfeflow.grid import HexMesh
from mhfeflow.linalg.amg import amg_setup
from mhfeflow.linalg.krylov import KrylovResult, gcr, gmres
from mhfeflow.linalg.precond import ilu0_build, jacobi_build, rcm_permutation
from mhfeflow.models import (
    AMGSettings,
    BenchRow,
    LinearSettings,
    PatternSpec,
    PreconditionerSettings,
)
from mhfeflow.physics import State
from mhfeflow.simulator.scenario import Scenario

logger = logging.getLogger(__name__)

# Tolerance that never triggers, so every study run performs exactly ``k`` iterations.
_NEVER = 1e-30

DEFAULT_SWEEP = ("ORIG", "A", "B", "C", "D", "E", "F", "jacobi")


def first_jacobian(scenario: Scenario) -> tuple[BlockJacobian, np.ndarray, State]:
    """Jacobian and Newton right-hand side ``-R`` of the first iteration of the first step."""
    model = scenario.model
    dt = scenario.schedule.dt_init
    state_prev = scenario.initial_state()
    state = state_prev.copy()
    state.time = state_prev.time + dt
    R = assemble_residual(model, state, state_prev, dt)
    J = assemble_jacobian(model, state, state_prev, dt)
    return J, -R.vector(), state


def interleaved_permutation(jacobian: BlockJacobian) -> np.ndarray:
    """Faces first, then ``(p_E, Sw_E)`` pairs cell by cell, then the well pressures."""
    n_f, n_p, n_s = jacobian.sizes
    cells = np.arange(n_s)
    pairs = np.column_stack([n_f + cells, n_f + n_p + cells]).ravel()
    wells = n_f + np.arange(n_s, n_p)
    return np.concatenate([np.arange(n_f), pairs, wells]).astype(np.int64)


def global_stage_study(
    jacobian: BlockJacobian, b: np.ndarray, k: int = 10
) -> Dict[str, KrylovResult]:
    """GMRES residual histories over ``k`` iterations for one-level global preconditioners.

    Keys: ``jacobi``, ``ilu0`` (π/p/s order), ``ilu0_rcm`` and ``ilu0_interleaved``. A
    preconditioner whose factorization meets a zero pivot is left out and logged.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    A = jacobian.to_csr()
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise InvalidArgumentError(f"rhs has {b.size} entries, system has {A.shape[0]}")
    builders = {
        "jacobi": lambda: jacobi_build(A),
        "ilu0": lambda: ilu0_build(A),
        "ilu0_rcm": lambda: ilu0_build(A, perm=rcm_permutation(A)),
        "ilu0_interleaved": lambda: ilu0_build(A, perm=interleaved_permutation(jacobian)),
    }
    results: Dict[str, KrylovResult] = {}
    for name, build in builders.items():
        try:
            M = build()
        except PreconditionerBuildError as exc:
            logger.warning("global_stage_skipped", extra={"variant": name, "reason": str(exc)})
            continue
        results[name] = gmres(lambda v: A @ v, b, apply_M=M, tol=_NEVER, maxit=k)
        logger.info(
            "global_stage_done",
            extra={"variant": name, "relres": results[name].relative_residual},
        )
    return results


def block_solvability(
    jacobian: BlockJacobian,
    mesh: HexMesh,
    spec: Optional[PatternSpec] = None,
    amg: Optional[AMGSettings] = None,
    tol: float = 1e-8,
    maxit: int = 200,
) -> Dict[str, KrylovResult]:
    """AMG-preconditioned GCR on ``J_ππ``, ``S̃``, ``J_pp`` and the whole ``J_PP``.

    The right-hand side is ``A · 1`` so every system has the same exact solution.
    """
    spec = spec or PatternSpec()
    F = build_edfa(jacobian.pipi, jacobian.pip, mesh, spec).F
    systems = {
        "J_pipi": jacobian.pipi,
        "S_approx": schur_approx(jacobian.pp, jacobian.ppi, F),
        "J_pp": jacobian.pp,
        "J_PP": jacobian.pressure_block(),
    }
    results: Dict[str, KrylovResult] = {}
    for name, A in systems.items():
        H = amg_setup(A, amg)
        rhs = A @ np.ones(A.shape[0])
        results[name] = gcr(lambda v, A=A: A @ v, rhs, apply_M=H, tol=tol, maxit=maxit)
        logger.info(
            "block_solvability",
            extra={
                "block": name,
                "iterations": results[name].iterations,
                "converged": results[name].converged,
            },
        )
    return results


def pattern_sweep(
    jacobian: BlockJacobian,
    b: np.ndarray,
    mesh: HexMesh,
    patterns: Iterable[PatternSpec | str] = DEFAULT_SWEEP,
    settings: Optional[PreconditionerSettings] = None,
    linear: Optional[LinearSettings] = None,
) -> list[BenchRow]:
    """Build BCPR with each pattern and solve ``J x = b`` with full GMRES."""
    settings = settings or PreconditionerSettings()
    linear = linear or LinearSettings()
    rows: list[BenchRow] = []
    for pattern in patterns:
        spec = pattern if isinstance(pattern, PatternSpec) else PatternSpec.parse(pattern)
        t = time.perf_counter()
        P = build_bcpr(jacobian, mesh, settings.model_copy(update={"pattern": spec}))
        t_p = time.perf_counter() - t
        t = time.perf_counter()
        result = gmres(
            lambda v: P.matrix @ v,
            b,
            apply_M=P,
            tol=linear.tol,
            maxit=linear.maxit,
            restart=linear.restart,
        )
        t_s = time.perf_counter() - t
        rows.append(
            BenchRow(
                pattern=spec.label,
                r_s=P.r_s,
                iterations=result.iterations,
                converged=result.converged,
                t_p=t_p,
                t_s=t_s,
                mean_pattern_size=P.report.mean_pattern_size,
                fallbacks=P.report.fallbacks,
                history=result.history,
            )
        )
        logger.info(
            "pattern_benchmarked",
            extra={"pattern": spec.label, "iterations": result.iterations, "r_s": P.r_s},
        )
    return rows
