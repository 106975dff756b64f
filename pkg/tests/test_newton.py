"""Tests for mhfeflow.simulator.newton — convergence test, chop and the Newton loop."""

from __future__ import annotations

import numpy as np
import pytest

from mhfeflow.discretization.assembly import Residual
from mhfeflow.discretization.wells import Well
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.grid import build_cartesian
from mhfeflow.models import LinearSettings, NewtonSettings, Schedule
from mhfeflow.physics import FluidProps, RockProps, State
from mhfeflow.simulator.newton import appleyard_chop, convergence_check, newton_solve
from mhfeflow.simulator.scenario import Scenario, build_five_spot


def single_cell_injection(newton: NewtonSettings) -> Scenario:
    mesh = build_cartesian(1, 1, 1, 10.0, 10.0, 1.0)
    return Scenario(
        mesh=mesh,
        rock=RockProps.uniform(1, 1e-12, 0.25, 1e-4, 500.0),
        fluid=FluidProps(),
        wells=(Well("INJ", (0,), "injector", "rate", 1.0),),
        schedule=Schedule(t_end=1.0, dt_init=0.1, dt_max=0.1),
        newton=newton,
        p_init=500.0,
    )


class TestConvergenceCheck:
    def test_absolute(self) -> None:
        assert convergence_check([1e-7, 1e-7, 1e-7], [1.0, 1.0, 1.0])

    def test_relative(self) -> None:
        assert convergence_check([1e-3, 1e-7, 1e-9], [1e4, 1.0, 1.0])

    def test_one_part_lagging(self) -> None:
        assert not convergence_check([1e-3, 1e-9, 1e-9], [1.0, 1.0, 1.0])

    def test_parts_starting_at_zero_count_as_reduced(self) -> None:
        assert convergence_check([1e-3, 1e-5, 0.0], [1e4, 0.0, 0.0])

    def test_accepts_residual_objects(self) -> None:
        R = Residual(r_pi=np.zeros(2), r_p=np.array([3.0, 4.0]), r_s=np.zeros(1))
        assert not convergence_check(R, [1.0, 5.0, 1.0])
        assert R.norms() == (0.0, 5.0, 0.0)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(InvalidArgumentError):
            convergence_check([1.0, 1.0], [1.0, 1.0, 1.0])


class TestAppleyardChop:
    def make_state(self) -> State:
        return State(
            p_elem=np.zeros(3), p_face=np.zeros(2), p_bh=np.zeros(0), sw=np.array([0.1, 0.5, 0.95])
        )

    def test_limits_and_clamps(self) -> None:
        dx = np.array([7.0, -3.0, 1.0, 2.0, 3.0, 0.5, -0.1, 0.2])
        out = appleyard_chop(dx, self.make_state(), 0.2, swr=0.0, sor=0.1)
        np.testing.assert_allclose(out[:5], dx[:5])
        np.testing.assert_allclose(out[5:], [0.2, -0.1, -0.05])

    def test_does_not_touch_input(self) -> None:
        dx = np.array([0.0] * 5 + [0.5, 0.5, 0.5])
        appleyard_chop(dx, self.make_state(), 0.2)
        assert dx[5] == 0.5

    def test_rejects_bad_limit(self) -> None:
        with pytest.raises(InvalidArgumentError):
            appleyard_chop(np.zeros(8), self.make_state(), 0.0)


class TestNewtonSolve:
    def test_single_cell_compression(self) -> None:
        newton = NewtonSettings(tol_abs=1e-8, tol_rel=1e-12, linear=LinearSettings(tol=1e-10))
        scenario = single_cell_injection(newton)
        prev = scenario.initial_state()
        result = newton_solve(scenario, prev, 0.1)
        assert result.converged
        # q Δt / (Ω φ0 c_r) = 1 * 0.1 / (100 * 0.25 * 1e-4)
        assert result.state.p_elem[0] == pytest.approx(540.0, abs=1e-5)
        phi = 0.25 * (1 + 1e-4 * 40.0)
        assert result.state.sw[0] == pytest.approx(0.1 / (100.0 * phi), rel=1e-6)
        assert result.state.time == pytest.approx(0.1)

    def test_closed_system_at_rest_needs_no_iteration(self, box_mesh) -> None:
        scenario = Scenario(
            mesh=box_mesh,
            rock=RockProps.uniform(32, 1e-12, 0.25, 5e-7, 500.0),
            fluid=FluidProps(),
            wells=(),
            schedule=Schedule(t_end=1.0, dt_init=0.1, dt_max=0.1),
        )
        result = newton_solve(scenario, scenario.initial_state(), 0.1)
        assert result.converged
        assert result.newton_iterations == 0
        assert result.report is None

    @pytest.mark.timeout(60)
    def test_five_spot_first_step(self, five_spot) -> None:
        result = newton_solve(five_spot, five_spot.initial_state(), 0.05)
        assert result.converged
        assert 1 <= result.newton_iterations <= 8
        assert all(it.linear_converged for it in result.iterations)
        assert result.linear_iterations == sum(it.linear_iterations for it in result.iterations)
        assert result.report is not None and result.report.pattern == "A"
        first = max(result.iterations[0].norms)
        last = max(result.iterations[-1].norms)
        assert last < first
        assert np.all(result.state.sw >= 0.0) and np.all(result.state.sw <= 1.0)

    def test_iteration_cap(self) -> None:
        newton = NewtonSettings(tol_abs=1e-14, tol_rel=1e-14, max_iter=1)
        scenario = build_five_spot(3, 3, 1, newton=newton)
        result = newton_solve(scenario, scenario.initial_state(), 0.05)
        assert not result.converged
        assert result.reason == "max_iter"
        assert result.newton_iterations == 1

    def test_linear_failure_stops_the_loop(self) -> None:
        newton = NewtonSettings(linear=LinearSettings(tol=1e-14, maxit=1))
        scenario = build_five_spot(3, 3, 1, newton=newton)
        result = newton_solve(scenario, scenario.initial_state(), 0.05)
        assert not result.converged
        assert result.reason == "linear"
        assert not result.iterations[-1].linear_converged

    def test_rejects_non_positive_dt(self, five_spot) -> None:
        with pytest.raises(InvalidArgumentError):
            newton_solve(five_spot, five_spot.initial_state(), -1.0)
