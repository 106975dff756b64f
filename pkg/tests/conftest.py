"""Shared pytest fixtures for the mhfeflow test suite."""

from __future__ import annotations

import os
import random

import numpy as np
import pytest

# Ensure no real env vars bleed in during tests
os.environ.setdefault("MHFEFLOW_WORKERS", "1")
os.environ.setdefault("MHFEFLOW_DETERMINISTIC", "false")

# Desk-scale cell used throughout the suite (metres)
CELL = (6.096, 3.048, 0.6096)


# ─── Anti-Flake Guardrails ───


@pytest.fixture(autouse=True)
def _deterministic_seed():
    """Reset random seeds before every test to prevent ordering-dependent flakes."""
    random.seed(42)
    np.random.seed(42)
    yield


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# ─── Meshes and models ───


@pytest.fixture()
def unit_cube():
    from mhfeflow.grid import build_cartesian

    return build_cartesian(1, 1, 1, 1.0, 1.0, 1.0)


@pytest.fixture()
def box_mesh():
    """4×4×2 Cartesian mesh with desk-scale cells."""
    from mhfeflow.grid import build_cartesian

    return build_cartesian(4, 4, 2, *CELL)


@pytest.fixture()
def dome_mesh():
    """6×6×2 mesh under an off-centre dome; every cell is distorted."""
    from mhfeflow.grid import build_cartesian, deform_dome

    mesh = build_cartesian(6, 6, 2, *CELL)
    return deform_dome(mesh, amplitude=1.0, radius=60.0, apex=(14.0, 7.5))


@pytest.fixture()
def fluid():
    from mhfeflow.physics import FluidProps

    return FluidProps()


def heterogeneous_rock(n_cells: int, seed: int = 7, p0: float = 500.0):
    """Log-normal anisotropic permeability around 1e-12 m^2."""
    from mhfeflow.physics import RockProps

    gen = np.random.default_rng(seed)
    k = np.exp(np.log(1e-12) + 0.8 * gen.standard_normal(n_cells))
    perm = np.column_stack([k, k * gen.uniform(0.5, 2.0, n_cells), 0.1 * k])
    return RockProps(
        perm=perm,
        phi0=gen.uniform(0.15, 0.3, n_cells),
        cr=5e-7,
        p0=np.full(n_cells, p0),
    )


def closed_model(mesh, rock=None, gravity: bool = False, **kwargs):
    """Flow model without wells."""
    from mhfeflow.discretization.assembly import FlowModel
    from mhfeflow.discretization.wells import build_well_model
    from mhfeflow.physics import FluidProps, RockProps

    rock = rock or RockProps.uniform(mesh.n_cells, 1e-12, 0.25, 5e-7, 500.0)
    return FlowModel(
        mesh=mesh,
        rock=rock,
        fluid=kwargs.pop("fluid", FluidProps()),
        wells=build_well_model(mesh, rock, ()),
        gravity=gravity,
        **kwargs,
    )


def perturbed_state(state, gen: np.random.Generator, sw_range=(0.2, 0.8)):
    """Copy of ``state`` with scattered pressures and saturations (no potential ties)."""
    out = state.copy()
    out.p_elem = out.p_elem + gen.uniform(-2.0, 2.0, out.p_elem.size)
    out.p_face = out.p_face + gen.uniform(-2.0, 2.0, out.p_face.size)
    out.p_bh = out.p_bh + gen.uniform(-1.0, 1.0, out.p_bh.size)
    out.sw = gen.uniform(*sw_range, out.sw.size)
    return out


@pytest.fixture()
def five_spot():
    """Homogeneous 4×4×2 five-spot, gravity off."""
    from mhfeflow.simulator.scenario import build_five_spot

    return build_five_spot(4, 4, 2)


@pytest.fixture()
def five_spot_gravity():
    """Heterogeneous 4×4×2 five-spot with gravity."""
    from mhfeflow.simulator.scenario import build_five_spot

    return build_five_spot(4, 4, 2, gravity=True, rock=heterogeneous_rock(32))


@pytest.fixture()
def first_system(five_spot):
    """First Jacobian, Newton right-hand side and state of the 4×4×2 five-spot."""
    from mhfeflow.studies import first_jacobian

    return first_jacobian(five_spot)


# ─── Run files ───

MINIMAL_CONFIG = """\
# desk five-spot
nx = 3
ny = 3
nz = 1
t_end = 0.2
dt_init = 0.05
dt_max = 0.1
"""


@pytest.fixture()
def config_file(tmp_path):
    """Path to a minimal run file writing into ``tmp_path / 'out'``."""
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL_CONFIG + f"output_dir = {tmp_path / 'out'}\n", encoding="utf-8")
    return path
