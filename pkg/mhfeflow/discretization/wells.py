"""Peaceman well model: perforation indices and per-well controls."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from mhfeflow.errors import ConfigError, InvalidArgumentError
from mhfeflow.grid import HexMesh
from mhfeflow.physics import FluidProps, Phase, RockProps, mobility, total_mobility

logger = logging.getLogger(__name__)

WellKind = Literal["injector", "producer"]
WellControl = Literal["rate", "bhp"]


@dataclass(frozen=True)
class Well:
    """One vertical well.

    ``target`` is a rate in m^3/d (positive for both injection and production) or a
    bottom-hole pressure in kPa.
    """

    name: str
    cells: tuple[int, ...]
    kind: WellKind
    control: WellControl
    target: float
    radius: float = 0.1

    @property
    def sign(self) -> float:
        """+1 when the perforation outflow counts toward the target, -1 for injection."""
        return 1.0 if self.kind == "producer" else -1.0


def peaceman_wi(extent, perm, radius: float) -> float:
    """Anisotropic Peaceman well index ``2π k̄ Δz / ln(r_eq / r_w)`` (m^3).

    ``extent`` is ``(Δx, Δy, Δz)`` and ``perm`` is ``(kx, ky, kz)``.
    """
    dx, dy, dz = (float(v) for v in extent)
    kx, ky = float(perm[0]), float(perm[1])
    if not radius > 0:
        raise ConfigError(f"well radius must be > 0, got {radius}")
    ratio = ky / kx
    r_eq = (
        0.28
        * np.sqrt(np.sqrt(ratio) * dx**2 + np.sqrt(1.0 / ratio) * dy**2)
        / (ratio**0.25 + ratio**-0.25)
    )
    if r_eq <= radius:
        raise ConfigError(
            f"equivalent radius {r_eq:.4g} m does not exceed well radius {radius:.4g} m"
        )
    return float(2.0 * np.pi * np.sqrt(kx * ky) * dz / np.log(r_eq / radius))


@dataclass(frozen=True, eq=False)
class WellModel:
    """Wells plus flattened perforation arrays (one entry per perforated cell)."""

    wells: tuple[Well, ...]
    perf_cell: np.ndarray
    perf_well: np.ndarray
    perf_wi: np.ndarray

    @property
    def n_wells(self) -> int:
        return len(self.wells)

    @property
    def injector_mask(self) -> np.ndarray:
        """Per perforation: True for injector perforations."""
        kinds = np.array([w.kind == "injector" for w in self.wells], dtype=bool)
        return kinds[self.perf_well] if self.perf_well.size else np.zeros(0, dtype=bool)

    @property
    def sign(self) -> np.ndarray:
        return np.array([w.sign for w in self.wells])

    def perforation_mobilities(
        self, fluid: FluidProps, sw: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(m_o, m_w, dm_o, dm_w)`` per perforation.

        Producers move each phase with its own mobility; injectors push water with the
        host cell's total mobility.
        """
        s = sw[self.perf_cell]
        lo, dlo = mobility(fluid, s, Phase.OIL)
        lw, dlw = mobility(fluid, s, Phase.WATER)
        lt, dlt = total_mobility(fluid, s)
        inj = self.injector_mask
        m_o = np.where(inj, 0.0, lo)
        dm_o = np.where(inj, 0.0, dlo)
        m_w = np.where(inj, lt, lw)
        dm_w = np.where(inj, dlt, dlw)
        return m_o, m_w, dm_o, dm_w

    def rates(
        self, fluid: FluidProps, p_elem: np.ndarray, sw: np.ndarray, p_bh: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Outflow ``(Q_o, Q_w)`` per perforation (m^3/d); negative values are injection."""
        m_o, m_w, _, _ = self.perforation_mobilities(fluid, sw)
        dp = self.perf_wi * (p_elem[self.perf_cell] - p_bh[self.perf_well])
        return m_o * dp, m_w * dp

    def backflowing_producers(
        self, fluid: FluidProps, p_elem: np.ndarray, sw: np.ndarray, p_bh: np.ndarray
    ) -> list[str]:
        """Producers whose net outflow went negative; they stay on BHP control."""
        q_o, q_w = self.rates(fluid, p_elem, sw, p_bh)
        net = np.bincount(self.perf_well, q_o + q_w, minlength=self.n_wells)
        return [w.name for w, q in zip(self.wells, net) if w.kind == "producer" and q < 0.0]


def build_well_model(mesh: HexMesh, rock: RockProps, wells: Sequence[Well]) -> WellModel:
    """Validate wells and compute one Peaceman index per perforation."""
    cells: list[int] = []
    owners: list[int] = []
    wis: list[float] = []
    extents = mesh.cell_extents
    names = set()
    for w_idx, well in enumerate(wells):
        if well.name in names:
            raise ConfigError(f"duplicate well name {well.name!r}")
        names.add(well.name)
        if not well.cells:
            raise ConfigError(f"well {well.name!r} has no perforations")
        if well.control == "rate" and well.target < 0:
            raise ConfigError(f"well {well.name!r}: rate target must be >= 0")
        for c in well.cells:
            if not 0 <= c < mesh.n_cells:
                raise InvalidArgumentError(f"well {well.name!r} perforates missing cell {c}")
            cells.append(int(c))
            owners.append(w_idx)
            wis.append(peaceman_wi(extents[c], rock.perm[c], well.radius))
    model = WellModel(
        wells=tuple(wells),
        perf_cell=np.asarray(cells, dtype=np.int64),
        perf_well=np.asarray(owners, dtype=np.int64),
        perf_wi=np.asarray(wis, dtype=float),
    )
    logger.debug("wells_built", extra={"wells": len(wells), "perforations": len(cells)})
    return model
