"""Simulation scenarios: mesh, properties, wells, schedule and solver settings in one place."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

from mhfeflow.discretization.assembly import FlowModel, initial_state
from mhfeflow.discretization.wells import Well, build_well_model
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.export.fields import load_perm_ascii
from mhfeflow.grid import HexMesh, build_cartesian, deform_dome
from mhfeflow.models import NewtonSettings, PatternSpec, Schedule
from mhfeflow.physics import FluidProps, RockProps, State
from mhfeflow.synthetic import SyntheticFieldGenerator

if TYPE_CHECKING:
    from mhfeflow.config import RunConfig

logger = logging.getLogger(__name__)

# Desk-scale five-spot defaults (metres, m^2, kPa, m^3/d).
FIVE_SPOT_CELL = (6.096, 3.048, 0.6096)
FIVE_SPOT_PERM = 1e-12
FIVE_SPOT_PHI0 = 0.25
FIVE_SPOT_CR = 5e-7
FIVE_SPOT_P_INIT = 500.0
FIVE_SPOT_RATE = 20.0
FIVE_SPOT_BHP = 490.0


@dataclass
class Scenario:
    """A complete run definition. The flow model is derived on construction."""

    mesh: HexMesh
    rock: RockProps
    fluid: FluidProps
    wells: tuple[Well, ...]
    schedule: Schedule
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    gravity: bool = False
    p_init: float = FIVE_SPOT_P_INIT
    sw_init: float = 0.0
    name: str = "scenario"
    model: FlowModel = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.fluid.swr <= self.sw_init <= 1.0 - self.fluid.sor:
            raise InvalidArgumentError(
                f"initial saturation {self.sw_init} outside [{self.fluid.swr}, "
                f"{1.0 - self.fluid.sor}]"
            )
        self.wells = tuple(self.wells)
        self.model = FlowModel(
            mesh=self.mesh,
            rock=self.rock,
            fluid=self.fluid,
            wells=build_well_model(self.mesh, self.rock, self.wells),
            gravity=self.gravity,
        )

    def initial_state(self) -> State:
        return initial_state(self.model, self.p_init, self.sw_init)

    def with_pattern(self, spec: PatternSpec) -> "Scenario":
        precond = self.newton.precond.model_copy(update={"pattern": spec})
        return dataclasses.replace(
            self, newton=self.newton.model_copy(update={"precond": precond})
        )

    def with_schedule(self, schedule: Schedule) -> "Scenario":
        return dataclasses.replace(self, schedule=schedule)


def five_spot_wells(
    nx: int,
    ny: int,
    nz: int,
    rate: float = FIVE_SPOT_RATE,
    bhp: float = FIVE_SPOT_BHP,
    radius: float = 0.1,
) -> tuple[Well, ...]:
    """Rate-controlled injector in the centre column, BHP producers in the corner columns.

    Every well perforates all layers. For even ``nx`` or ``ny`` the injector takes the cell
    just below the centre.
    """

    def column(i: int, j: int) -> tuple[int, ...]:
        return tuple(i + nx * (j + ny * k) for k in range(nz))

    ci, cj = (nx - 1) // 2, (ny - 1) // 2
    wells = [Well("INJ", column(ci, cj), "injector", "rate", rate, radius)]
    corners = [(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)]
    for n, (i, j) in enumerate(corners, start=1):
        wells.append(Well(f"PROD{n}", column(i, j), "producer", "bhp", bhp, radius))
    return tuple(wells)


def build_five_spot(
    nx: int,
    ny: int,
    nz: int,
    cell_size: Sequence[float] = FIVE_SPOT_CELL,
    rate: float = FIVE_SPOT_RATE,
    bhp: float = FIVE_SPOT_BHP,
    gravity: bool = False,
    *,
    rock: Optional[RockProps] = None,
    fluid: Optional[FluidProps] = None,
    schedule: Optional[Schedule] = None,
    newton: Optional[NewtonSettings] = None,
    mesh: Optional[HexMesh] = None,
    p_init: float = FIVE_SPOT_P_INIT,
    sw_init: float = 0.0,
    well_radius: float = 0.1,
) -> Scenario:
    """Water flood with one central injector and four corner producers.

    ``mesh`` may replace the Cartesian box (e.g. a dome deformation of it) as long as it keeps
    the ``nx × ny × nz`` cell ordering.
    """
    if nx < 2 or ny < 2:
        raise InvalidArgumentError(f"a five-spot needs nx, ny >= 2, got {nx}x{ny}")
    dx, dy, dz = (float(v) for v in cell_size)
    mesh = mesh or build_cartesian(nx, ny, nz, dx, dy, dz)
    if mesh.n_cells != nx * ny * nz:
        raise InvalidArgumentError(f"mesh has {mesh.n_cells} cells, expected {nx * ny * nz}")
    rock = rock or RockProps.uniform(
        mesh.n_cells, FIVE_SPOT_PERM, FIVE_SPOT_PHI0, FIVE_SPOT_CR, p_init
    )
    scenario = Scenario(
        mesh=mesh,
        rock=rock,
        fluid=fluid or FluidProps(),
        wells=five_spot_wells(nx, ny, nz, rate=rate, bhp=bhp, radius=well_radius),
        schedule=schedule or Schedule(t_end=30.0, dt_init=0.05, dt_max=1.0),
        newton=newton or NewtonSettings(),
        gravity=gravity,
        p_init=p_init,
        sw_init=sw_init,
        name=f"five-spot {nx}x{ny}x{nz}",
    )
    logger.info(
        "scenario_built",
        extra={"scenario": scenario.name, "cells": mesh.n_cells, "gravity": gravity},
    )
    return scenario


def rock_from_config(cfg: "RunConfig") -> RockProps:
    """Uniform rock, a property file or a synthetic field, as the run file selects."""
    n = cfg.nx * cfg.ny * cfg.nz
    if cfg.perm_file:
        props = load_perm_ascii(cfg.perm_file, cfg.nx, cfg.ny, cfg.nz, cfg.porosity_floor)
        return props.to_rock(cr=cfg.cr, p0=cfg.p_init)
    if cfg.synthetic:
        props = SyntheticFieldGenerator(seed=cfg.seed).generate(
            cfg.nx,
            cfg.ny,
            cfg.nz,
            k_mean=cfg.perm,
            log_std=cfg.synthetic_log_std,
            correlation=cfg.synthetic_correlation,
            anisotropy=cfg.synthetic_anisotropy,
            phi_mean=cfg.phi0,
        )
        return props.to_rock(cr=cfg.cr, p0=cfg.p_init)
    return RockProps.uniform(n, cfg.perm, cfg.phi0, cfg.cr, cfg.p_init)


def scenario_from_config(cfg: "RunConfig", workers: Optional[int] = None) -> Scenario:
    """Five-spot scenario described by a validated run file."""
    mesh = build_cartesian(cfg.nx, cfg.ny, cfg.nz, cfg.dx, cfg.dy, cfg.dz)
    if cfg.dome_amplitude > 0:
        mesh = deform_dome(mesh, cfg.dome_amplitude, cfg.dome_radius)
    fluid = FluidProps(
        mu_o=cfg.mu_o,
        mu_w=cfg.mu_w,
        gamma_o=cfg.gamma_o,
        gamma_w=cfg.gamma_w,
        swr=cfg.swr,
        sor=cfg.sor,
        corey_exp=cfg.corey_exp,
    )
    return build_five_spot(
        cfg.nx,
        cfg.ny,
        cfg.nz,
        (cfg.dx, cfg.dy, cfg.dz),
        rate=cfg.rate,
        bhp=cfg.bhp,
        gravity=cfg.gravity,
        rock=rock_from_config(cfg),
        fluid=fluid,
        schedule=cfg.schedule(),
        newton=cfg.newton_settings(workers),
        mesh=mesh,
        p_init=cfg.p_init,
        sw_init=cfg.sw_init,
        well_radius=cfg.well_radius,
    )
