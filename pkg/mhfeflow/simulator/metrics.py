"""Run diagnostics: CFL numbers and the discrete water balance."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from mhfeflow.discretization.assembly import FlowModel, face_fluxes
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.physics import State, porosity


def cell_cfl(model: FlowModel, state: State, dt: float) -> np.ndarray:
    """``Δt · (outgoing total flux + production) / (φ Ω)`` per cell."""
    if dt < 0:
        raise InvalidArgumentError(f"dt must be >= 0, got {dt}")
    mesh = model.mesh
    q = face_fluxes(model, state)
    total = q.total
    c0, c1 = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    out = np.bincount(c0, np.maximum(total, 0.0), minlength=model.n_e)
    inner = c1 >= 0
    out += np.bincount(c1[inner], np.maximum(-total[inner], 0.0), minlength=model.n_e)
    prod = np.maximum(q.well_oil + q.well_water, 0.0)
    out += np.bincount(model.wells.perf_cell, prod, minlength=model.n_e)
    phi, _ = porosity(model.rock, state.p_elem)
    return dt * out / (phi * mesh.cell_volume)


def cfl_report(model: FlowModel, states: Sequence[State], dts: Sequence[float]) -> float:
    """Largest cell CFL number over a run; ``states[k]`` is the state reached with ``dts[k]``."""
    if len(states) != len(dts):
        raise InvalidArgumentError(f"{len(states)} states but {len(dts)} step sizes")
    return max((float(cell_cfl(model, s, dt).max()) for s, dt in zip(states, dts)), default=0.0)


def water_balance(
    model: FlowModel, state_prev: State, state: State, dt: float
) -> tuple[float, float]:
    """``(ΔV_w, net well inflow · Δt)`` in m^3 over one step; equal for a converged step."""
    phi_prev, _ = porosity(model.rock, state_prev.p_elem)
    phi, _ = porosity(model.rock, state.p_elem)
    vol = model.mesh.cell_volume
    change = float(np.sum(vol * (phi * state.sw - phi_prev * state_prev.sw)))
    q = face_fluxes(model, state)
    boundary = 0.0
    d = model.dirichlet_faces
    if d.size:
        boundary = float(np.sum(q.water[d]))
    inflow = -(float(np.sum(q.well_water)) + boundary) * dt
    return change, inflow
