"""Adaptive time stepping around :func:`newton_solve`.

A step that fails (Newton or GMRES non-convergence, or a state leaving the physical range) is
retried by tenacity with the step size halved on every attempt. Accepted steps grow the next
step by ``schedule.growth`` up to ``schedule.dt_max``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from tenacity import RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt

from mhfeflow.bcpr.preconditioner import BCPRCache
from mhfeflow.errors import ConstitutiveError, NumericError, SimulationError, SingularMatrixError
from mhfeflow.models import BuildReport, RunMetrics, StepMetrics
from mhfeflow.physics import State
from mhfeflow.simulator.metrics import cell_cfl
from mhfeflow.simulator.newton import IterationMetrics, NewtonResult, newton_solve
from mhfeflow.simulator.scenario import Scenario

logger = logging.getLogger(__name__)

# Relative slack when comparing the clock against t_end.
_TIME_RTOL = 1e-12


class StepFailure(Exception):
    """A time step that must be retried with a smaller Δt.

    ``iterations`` holds the Newton iterations the failed attempt spent, when it got far
    enough to report them.
    """

    def __init__(
        self, message: str, dt: float, iterations: Optional[List[IterationMetrics]] = None
    ) -> None:
        super().__init__(message)
        self.dt = dt
        self.iterations = iterations or []


@dataclass
class RunResult:
    state: State
    metrics: RunMetrics
    cfl: List[float] = field(default_factory=list)
    states: List[State] = field(default_factory=list)
    report: Optional[BuildReport] = None


def _log_cut(retry_state: RetryCallState) -> None:
    exc = retry_state.outcome.exception() if retry_state.outcome else None
    logger.warning(
        "timestep_cut",
        extra={
            "attempt": retry_state.attempt_number,
            "dt": getattr(exc, "dt", None),
            "reason": str(exc),
        },
    )


def _attempt(scenario: Scenario, state: State, dt: float, cache: BCPRCache) -> NewtonResult:
    try:
        result = newton_solve(scenario, state, dt, cache=cache)
    except (ConstitutiveError, NumericError, SingularMatrixError) as exc:
        raise StepFailure(f"{type(exc).__name__}: {exc}", dt) from exc
    if not result.converged:
        raise StepFailure(
            f"newton failed ({result.reason or 'unconverged'})", dt, result.iterations
        )
    return result


def timestep_driver(
    scenario: Scenario,
    *,
    cache: Optional[BCPRCache] = None,
    keep_states: bool = False,
    on_step: Optional[Callable[[StepMetrics, State], None]] = None,
) -> RunResult:
    """Run ``scenario`` from its initial state to ``t_end`` (or ``max_steps``).

    Raises
    ------
    SimulationError
        When a step still fails after ``schedule.max_cuts`` halvings.
    """
    sched = scenario.schedule
    cache = cache if cache is not None else BCPRCache()
    state = scenario.initial_state()
    metrics = RunMetrics()
    result = RunResult(state=state, metrics=metrics)
    dt = sched.dt_init
    t_end = sched.t_end
    step = 0

    while state.time < t_end * (1.0 - _TIME_RTOL):
        if sched.max_steps is not None and step >= sched.max_steps:
            break
        dt_step = min(dt, t_end - state.time)
        retrying = Retrying(
            stop=stop_after_attempt(sched.max_cuts + 1),
            retry=retry_if_exception_type(StepFailure),
            before_sleep=_log_cut,
            reraise=True,
        )
        # Iterations of rejected attempts still count towards the step's cost.
        spent: List[IterationMetrics] = []
        t0 = time.perf_counter()
        try:
            for attempt in retrying:
                with attempt:
                    n = attempt.retry_state.attempt_number
                    dt_try = dt_step / 2 ** (n - 1)
                    try:
                        newton = _attempt(scenario, state, dt_try, cache)
                    except StepFailure as exc:
                        spent.extend(exc.iterations)
                        raise
        except StepFailure as exc:
            raise SimulationError(
                f"time step at t={state.time:.6g} d failed after {sched.max_cuts} cuts: {exc}"
            ) from exc

        step += 1
        state = newton.state
        cfl = float(cell_cfl(scenario.model, state, dt_try).max())
        first = newton.iterations[0] if newton.iterations else None
        report = newton.report
        iterations = spent + newton.iterations
        record = StepMetrics(
            step=step,
            time=state.time,
            dt=dt_try,
            newton_iterations=len(iterations),
            linear_iterations=sum(it.linear_iterations for it in iterations),
            t_p=sum(it.t_p for it in iterations),
            t_s=sum(it.t_s for it in iterations),
            t_t=time.perf_counter() - t0,
            first_linear_iterations=first.linear_iterations if first else 0,
            first_t_p=first.t_p if first else 0.0,
            first_t_s=first.t_s if first else 0.0,
            first_t_t=first.t_t if first else 0.0,
            cuts=n - 1,
            inner_failures=sum(it.inner_failures for it in iterations),
            r_s=report.r_s if report else (result.report.r_s if result.report else 1.0),
            max_cfl=cfl,
        )
        metrics.steps.append(record)
        result.cfl.append(cfl)
        if report is not None:
            result.report = report
        if keep_states:
            result.states.append(state)
        if on_step is not None:
            on_step(record, state)
        logger.info(
            "timestep_done",
            extra={
                "step": step,
                "time": state.time,
                "dt": dt_try,
                "newton": record.newton_iterations,
                "linear": record.linear_iterations,
                "cuts": record.cuts,
            },
        )
        backflow = scenario.model.wells.backflowing_producers(
            scenario.model.fluid, state.p_elem, state.sw, state.p_bh
        )
        if backflow:
            logger.warning(
                "producer_backflow", extra={"step": step, "time": state.time, "wells": backflow}
            )
        dt = min(sched.growth * dt_try, sched.dt_max)

    result.state = state
    return result
