"""Rock and fluid constitutive laws with analytical derivatives.

Units follow the field convention of the project: kPa, m, d. Viscosities are in kPa·d, so a
mobility ``kr / mu`` is in 1/(kPa·d) and ``mobility × m^3 × kPa`` is a rate in m^3/d.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mhfeflow.errors import ConstitutiveError, InvalidArgumentError


class Phase(str, Enum):
    """Flowing phases."""

    OIL = "oil"
    WATER = "water"


@dataclass(frozen=True, eq=False)
class RockProps:
    """Per-cell rock properties.

    Parameters
    ----------
    perm:
        ``(n_cells, 3)`` diagonal permeability ``(kx, ky, kz)`` in m^2.
    phi0:
        Porosity at the reference pressure.
    cr:
        Rock compressibility in 1/kPa.
    p0:
        Reference pressure per cell in kPa.
    """

    perm: np.ndarray
    phi0: np.ndarray
    cr: float
    p0: np.ndarray

    def __post_init__(self) -> None:
        perm = np.asarray(self.perm, dtype=float)
        phi0 = np.asarray(self.phi0, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        if perm.ndim != 2 or perm.shape[1] != 3:
            raise InvalidArgumentError(f"perm must have shape (n_cells, 3), got {perm.shape}")
        if phi0.shape != (perm.shape[0],) or p0.shape != (perm.shape[0],):
            raise InvalidArgumentError("phi0 and p0 must have one value per cell")
        if not np.all(perm > 0):
            raise InvalidArgumentError("permeability must be strictly positive")
        if not np.all((phi0 > 0) & (phi0 <= 1)):
            raise InvalidArgumentError("phi0 must lie in (0, 1]")
        if self.cr < 0:
            raise InvalidArgumentError(f"rock compressibility must be >= 0, got {self.cr}")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "phi0", phi0)
        object.__setattr__(self, "p0", p0)

    @property
    def n_cells(self) -> int:
        return int(self.perm.shape[0])

    @classmethod
    def uniform(
        cls,
        n_cells: int,
        perm: float | tuple[float, float, float],
        phi0: float,
        cr: float,
        p0: float,
    ) -> "RockProps":
        k = np.broadcast_to(np.asarray(perm, dtype=float), (3,))
        return cls(
            perm=np.tile(k, (n_cells, 1)),
            phi0=np.full(n_cells, float(phi0)),
            cr=float(cr),
            p0=np.full(n_cells, float(p0)),
        )


@dataclass(frozen=True, eq=False)
class RockField:
    """Per-cell ``(kx, ky, kz)`` in m^2 and porosity in x-fastest order, before a pressure
    reference and compressibility turn it into :class:`RockProps`."""

    perm: np.ndarray
    phi: np.ndarray
    dims: tuple[int, int, int]

    @property
    def contrast_decades(self) -> float:
        k = self.perm[:, 0]
        return float(np.log10(k.max() / k.min()))

    def to_rock(self, cr: float = 0.0, p0: float = 0.0) -> RockProps:
        return RockProps(
            perm=self.perm, phi0=self.phi, cr=cr, p0=np.full(self.phi.size, float(p0))
        )


class FluidProps(BaseModel):
    """Oil/water properties; defaults are the reference test-case values."""

    model_config = ConfigDict(frozen=True)

    mu_o: float = Field(2.3148e-11, gt=0, description="oil viscosity, kPa·d")
    mu_w: float = Field(1.1574e-11, gt=0, description="water viscosity, kPa·d")
    gamma_o: float = Field(8.00, description="oil specific weight, kPa/m")
    gamma_w: float = Field(9.81, description="water specific weight, kPa/m")
    swr: float = Field(0.0, ge=0, description="residual water saturation")
    sor: float = Field(0.0, ge=0, description="residual oil saturation")
    corey_exp: float = Field(2.0, ge=1, description="relative-permeability exponent")

    @model_validator(mode="after")
    def validate_residuals(self) -> "FluidProps":
        if self.swr + self.sor >= 1.0:
            raise ValueError(f"swr + sor must be < 1, got {self.swr + self.sor:.4f}")
        return self

    @property
    def reference_mobility(self) -> float:
        """Sum of end-point mobilities, the scale of the face-continuity rows."""
        return 1.0 / self.mu_o + 1.0 / self.mu_w

    def viscosity(self, phase: Phase) -> float:
        return self.mu_o if phase is Phase.OIL else self.mu_w

    def specific_weight(self, phase: Phase) -> float:
        return self.gamma_o if phase is Phase.OIL else self.gamma_w


@dataclass
class State:
    """Primary unknowns at one time level."""

    p_elem: np.ndarray
    p_face: np.ndarray
    p_bh: np.ndarray
    sw: np.ndarray
    time: float = 0.0
    _sizes: tuple[int, int, int, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.p_elem = np.asarray(self.p_elem, dtype=float)
        self.p_face = np.asarray(self.p_face, dtype=float)
        self.p_bh = np.asarray(self.p_bh, dtype=float)
        self.sw = np.asarray(self.sw, dtype=float)
        if self.sw.shape != self.p_elem.shape:
            raise InvalidArgumentError("sw and p_elem must have one value per cell")
        self._sizes = (self.p_face.size, self.p_elem.size, self.p_bh.size, self.sw.size)

    def copy(self) -> "State":
        return State(
            p_elem=self.p_elem.copy(),
            p_face=self.p_face.copy(),
            p_bh=self.p_bh.copy(),
            sw=self.sw.copy(),
            time=self.time,
        )

    def to_vector(self) -> np.ndarray:
        """Unknowns in Jacobian order ``[π; p_elem; p_bh; Sw]``."""
        return np.concatenate([self.p_face, self.p_elem, self.p_bh, self.sw])

    def with_vector(self, x: np.ndarray, time: float | None = None) -> "State":
        n_f, n_e, n_w, _ = self._sizes
        return State(
            p_elem=x[n_f : n_f + n_e].copy(),
            p_face=x[:n_f].copy(),
            p_bh=x[n_f + n_e : n_f + n_e + n_w].copy(),
            sw=x[n_f + n_e + n_w :].copy(),
            time=self.time if time is None else time,
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p_elem))
            and np.all(np.isfinite(self.p_face))
            and np.all(np.isfinite(self.p_bh))
            and np.all(np.isfinite(self.sw))
        )


# ---------------------------------------------------------------------------
# Constitutive laws
# ---------------------------------------------------------------------------


def porosity(
    rock: RockProps, p: np.ndarray, cells: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(phi, dphi/dp)`` with ``phi = phi0 (1 + cr (p - p0))``."""
    idx = slice(None) if cells is None else np.asarray(cells)
    phi0 = rock.phi0[idx]
    phi = phi0 * (1.0 + rock.cr * (np.asarray(p, dtype=float) - rock.p0[idx]))
    bad = np.flatnonzero(~(np.atleast_1d(phi) > 0.0))
    if bad.size:
        where = int(bad[0]) if cells is None else int(np.atleast_1d(cells)[bad[0]])
        raise ConstitutiveError(
            f"porosity {np.atleast_1d(phi)[bad[0]]:.6g} <= 0 in cell {where}: "
            "unphysical pressure drop"
        )
    return phi, phi0 * rock.cr


def relperm(fluid: FluidProps, sw: np.ndarray, phase: Phase) -> tuple[np.ndarray, np.ndarray]:
    """Brooks-Corey relative permeability and its Sw derivative.

    ``Se = (Sw - Swr) / (1 - Swr - Sor)`` is clamped to [0, 1]; the derivative is zero
    outside ``[Swr, 1 - Sor]``.
    """
    sw = np.asarray(sw, dtype=float)
    span = 1.0 - fluid.swr - fluid.sor
    raw = (sw - fluid.swr) / span
    se = np.clip(raw, 0.0, 1.0)
    inside = (raw >= 0.0) & (raw <= 1.0)
    n = fluid.corey_exp
    if phase is Phase.WATER:
        kr = se**n
        dkr = np.where(inside, n * se ** (n - 1.0) / span, 0.0)
    else:
        kr = (1.0 - se) ** n
        dkr = np.where(inside, -n * (1.0 - se) ** (n - 1.0) / span, 0.0)
    return kr, dkr


def mobility(fluid: FluidProps, sw: np.ndarray, phase: Phase) -> tuple[np.ndarray, np.ndarray]:
    """Phase mobility ``kr / mu`` and its Sw derivative; independent of pressure."""
    kr, dkr = relperm(fluid, sw, phase)
    mu = fluid.viscosity(phase)
    return kr / mu, dkr / mu


def total_mobility(fluid: FluidProps, sw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, dlo = mobility(fluid, sw, Phase.OIL)
    lw, dlw = mobility(fluid, sw, Phase.WATER)
    return lo + lw, dlo + dlw


def fractional_flow(fluid: FluidProps, sw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Oil fractional flow ``f_o = λ_o / λ_t`` and its saturation derivative.

    Raises
    ------
    ConstitutiveError
        When the total mobility vanishes, which the end-point checks on ``swr + sor`` exclude.
    """
    lo, dlo = mobility(fluid, sw, Phase.OIL)
    lt, dlt = total_mobility(fluid, sw)
    if np.any(lt <= 0.0):
        raise ConstitutiveError("total mobility vanished; fractional flow is undefined")
    f = lo / lt
    return f, (dlo * lt - lo * dlt) / lt**2
