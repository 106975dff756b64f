"""Right-preconditioned Krylov solvers: full GMRES and GCR.

Both return flagged results; only NaN/Inf raises. GMRES keeps the preconditioned directions
``z_j = M v_j`` so that a preconditioner that varies between calls (an inner iterative solve)
is handled exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from mhfeflow.errors import NumericError

logger = logging.getLogger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]

# Relative size of the new Arnoldi vector below which the Krylov space is invariant.
_BREAKDOWN_RTOL = 1e-14


@dataclass
class KrylovResult:
    """Outcome of an iterative solve; ``history`` holds ``‖r_k‖ / ‖r_0‖`` starting at 1."""

    x: np.ndarray
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)
    breakdown: bool = False

    @property
    def relative_residual(self) -> float:
        return self.history[-1] if self.history else 0.0


def _identity(v: np.ndarray) -> np.ndarray:
    return v


def _check_finite(v: np.ndarray, stage: str) -> None:
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite values produced in {stage}", stage=stage)


def gmres(
    apply_A: Operator,
    b: np.ndarray,
    apply_M: Optional[Operator] = None,
    tol: float = 1e-6,
    maxit: int = 300,
    restart: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
) -> KrylovResult:
    """Right-preconditioned GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.

    Stops when ``‖r_k‖ / ‖r_0‖ < tol`` or after ``maxit`` iterations. ``restart=None`` runs
    full GMRES.
    """
    M = apply_M or _identity
    b = np.asarray(b, dtype=float)
    _check_finite(b, "gmres rhs")
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else b.copy()
    beta0 = float(np.linalg.norm(r))
    history = [1.0]
    if beta0 == 0.0:
        return KrylovResult(x=x, iterations=0, converged=True, history=history)

    m = min(restart or maxit, maxit)
    total = 0
    beta = beta0
    converged = False
    breakdown = False
    while total < maxit:
        size = min(m, maxit - total)
        V = np.zeros((size + 1, n))
        Z = np.zeros((size, n))
        H = np.zeros((size + 1, size))
        cs = np.zeros(size)
        sn = np.zeros(size)
        g = np.zeros(size + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        for j in range(size):
            Z[j] = M(V[j])
            _check_finite(Z[j], "gmres preconditioner")
            w = apply_A(Z[j])
            _check_finite(w, "gmres operator")
            w_norm = float(np.linalg.norm(w))
            for i in range(j + 1):
                H[i, j] = np.dot(w, V[i])
                w -= H[i, j] * V[i]
            h = float(np.linalg.norm(w))
            H[j + 1, j] = h
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            rho = np.hypot(H[j, j], H[j + 1, j])
            if rho == 0.0:
                breakdown = True
                break
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            total += 1
            history.append(abs(g[j + 1]) / beta0)
            if history[-1] < tol:
                converged = True
                break
            if h <= _BREAKDOWN_RTOL * w_norm:
                breakdown = True
                break
            V[j + 1] = w / h

        if k:
            y = solve_triangular(H[:k, :k], g[:k], check_finite=False)
            x += Z[:k].T @ y
        if converged or breakdown or total >= maxit:
            break
        r = b - apply_A(x)
        beta = float(np.linalg.norm(r))
        if beta / beta0 < tol:
            history[-1] = beta / beta0
            converged = True
            break

    if breakdown and not converged:
        converged = history[-1] < tol
    logger.debug(
        "gmres_done",
        extra={"iterations": total, "converged": converged, "relres": history[-1]},
    )
    return KrylovResult(
        x=x, iterations=total, converged=converged, history=history, breakdown=breakdown
    )


def gcr(
    apply_A: Operator,
    b: np.ndarray,
    apply_M: Optional[Operator] = None,
    tol: float = 1e-5,
    maxit: int = 15,
    x0: Optional[np.ndarray] = None,
) -> KrylovResult:
    """Generalized Conjugate Residual with right preconditioning and full orthogonalization.

    Reaching ``maxit`` returns the last iterate with ``converged=False``.
    """
    M = apply_M or _identity
    b = np.asarray(b, dtype=float)
    _check_finite(b, "gcr rhs")
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else b.copy()
    beta0 = float(np.linalg.norm(r))
    history = [1.0]
    if beta0 == 0.0:
        return KrylovResult(x=x, iterations=0, converged=True, history=history)

    Zs: list[np.ndarray] = []
    Cs: list[np.ndarray] = []
    converged = False
    breakdown = False
    it = 0
    while it < maxit:
        z = M(r)
        _check_finite(z, "gcr preconditioner")
        c = apply_A(z)
        _check_finite(c, "gcr operator")
        for zi, ci in zip(Zs, Cs):
            alpha = np.dot(ci, c)
            c -= alpha * ci
            z -= alpha * zi
        nc = float(np.linalg.norm(c))
        if nc == 0.0:
            breakdown = True
            break
        c /= nc
        z /= nc
        alpha = np.dot(c, r)
        x += alpha * z
        r -= alpha * c
        Zs.append(z)
        Cs.append(c)
        it += 1
        history.append(float(np.linalg.norm(r)) / beta0)
        if history[-1] < tol:
            converged = True
            break
    return KrylovResult(
        x=x, iterations=it, converged=converged, history=history, breakdown=breakdown
    )
