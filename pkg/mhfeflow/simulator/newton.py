"""Newton iteration for one implicit time step.

Each iteration assembles the residual, tests convergence, assembles the Jacobian, builds the
BCPR preconditioner and solves the Newton system with right-preconditioned full GMRES. The
saturation part of the update is limited by an Appleyard chop.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np

from mhfeflow.bcpr.preconditioner import BCPRCache, build_bcpr
from mhfeflow.discretization.assembly import Residual, assemble_jacobian, assemble_residual
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.linalg.krylov import gmres
from mhfeflow.models import BuildReport
from mhfeflow.physics import State

if TYPE_CHECKING:
    from mhfeflow.simulator.scenario import Scenario

logger = logging.getLogger(__name__)

Norms = Union[Residual, Sequence[float]]


@dataclass
class IterationMetrics:
    """One Newton iteration: residual norms before the update and the linear solve cost."""

    iteration: int
    norms: tuple[float, float, float]
    linear_iterations: int
    linear_converged: bool
    t_p: float
    t_s: float
    t_t: float
    inner_failures: int = 0


@dataclass
class NewtonResult:
    state: State
    converged: bool
    iterations: list[IterationMetrics] = field(default_factory=list)
    reason: str = ""
    report: Optional[BuildReport] = None

    @property
    def newton_iterations(self) -> int:
        return len(self.iterations)

    @property
    def linear_iterations(self) -> int:
        return sum(it.linear_iterations for it in self.iterations)


def _norms(R: Norms) -> np.ndarray:
    if isinstance(R, Residual):
        return np.array(R.norms())
    return np.asarray(R, dtype=float)


def convergence_check(
    R: Norms, R0: Norms, tol_abs: float = 1e-6, tol_rel: float = 1e-6
) -> bool:
    """Three-part test: every part norm below ``tol_abs``, or every part reduced below
    ``tol_rel`` relative to the start of the step. Parts that started at zero count as
    reduced."""
    r = _norms(R)
    r0 = _norms(R0)
    if r.shape != r0.shape:
        raise InvalidArgumentError(f"residual parts differ: {r.shape} vs {r0.shape}")
    if np.max(r) < tol_abs:
        return True
    return bool(np.all((r0 == 0.0) | (r < tol_rel * r0)))


def appleyard_chop(
    dx: np.ndarray, state: State, max_change: float = 0.2, swr: float = 0.0, sor: float = 0.0
) -> np.ndarray:
    """Limit every saturation update to ``max_change`` and keep ``Sw`` in ``[swr, 1 - sor]``.

    ``dx`` is a full Newton update in ``[π; p; p_bh; Sw]`` order; pressures pass through.
    """
    if not 0.0 < max_change <= 1.0:
        raise InvalidArgumentError(f"chop limit must be in (0, 1], got {max_change}")
    out = np.array(dx, dtype=float)
    n_e = state.sw.size
    ds = np.clip(out[-n_e:], -max_change, max_change)
    sw_new = np.clip(state.sw + ds, swr, 1.0 - sor)
    out[-n_e:] = sw_new - state.sw
    return out


def newton_solve(
    scenario: "Scenario",
    state_prev: State,
    dt: float,
    cache: Optional[BCPRCache] = None,
) -> NewtonResult:
    """Advance ``state_prev`` by ``dt``; never raises on non-convergence."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    model = scenario.model
    settings = scenario.newton
    fluid = model.fluid
    state = state_prev.copy()
    state.time = state_prev.time + dt
    result = NewtonResult(state=state, converged=False)

    r0: Optional[np.ndarray] = None
    for it in range(settings.max_iter + 1):
        t_start = time.perf_counter()
        R = assemble_residual(model, state, state_prev, dt)
        norms = R.norms()
        if r0 is None:
            r0 = np.array(norms)
        if convergence_check(norms, r0, settings.tol_abs, settings.tol_rel):
            result.converged = True
            break
        if it == settings.max_iter:
            result.reason = "max_iter"
            break

        J = assemble_jacobian(model, state, state_prev, dt)
        t = time.perf_counter()
        P = build_bcpr(J, model.mesh, settings.precond, gravity=model.gravity, cache=cache)
        t_p = time.perf_counter() - t
        t = time.perf_counter()
        lin = gmres(
            lambda v: P.matrix @ v,
            -R.vector(),
            apply_M=P,
            tol=settings.linear.tol,
            maxit=settings.linear.maxit,
            restart=settings.linear.restart,
        )
        t_s = time.perf_counter() - t
        result.report = P.report
        result.iterations.append(
            IterationMetrics(
                iteration=it,
                norms=norms,
                linear_iterations=lin.iterations,
                linear_converged=lin.converged,
                t_p=t_p,
                t_s=t_s,
                t_t=time.perf_counter() - t_start,
                inner_failures=P.inner_failures,
            )
        )
        logger.debug(
            "newton_iteration",
            extra={
                "iteration": it,
                "r_pi": norms[0],
                "r_p": norms[1],
                "r_s": norms[2],
                "linear_iterations": lin.iterations,
            },
        )
        if not lin.converged:
            result.reason = "linear"
            logger.info(
                "linear_solve_failed",
                extra={"iteration": it, "relres": lin.relative_residual, "dt": dt},
            )
            break

        dx = appleyard_chop(lin.x, state, settings.chop, fluid.swr, fluid.sor)
        state = state.with_vector(state.to_vector() + dx)
        if not state.is_finite():
            result.reason = "non_finite"
            break

    result.state = state
    return result
