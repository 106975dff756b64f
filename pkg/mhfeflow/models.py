"""Pydantic models shared across the solver: settings groups, pattern spec, metrics, reports."""

from __future__ import annotations

from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PatternLetter(str, Enum):
    """Static EDFA patterns, ordered by growing fill."""

    ORIG = "ORIG"
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"


# letter -> (level, laterals)
_LETTERS: Dict[PatternLetter, tuple[int, bool]] = {
    PatternLetter.ORIG: (0, False),
    PatternLetter.A: (1, False),
    PatternLetter.B: (1, True),
    PatternLetter.C: (2, False),
    PatternLetter.D: (2, True),
    PatternLetter.E: (3, False),
    PatternLetter.F: (4, False),
}


class PatternSpec(BaseModel):
    """How the columns of the decoupling factor F̃ are sparsified.

    ``static`` uses a geometric face pattern around each cell (``level`` cells in every axis
    direction, optionally with the side faces of the visited cells). ``dynamic`` starts from the
    cell's own faces and adds the ``n_add`` largest-residual faces per step until ``n_ent`` new
    entries are in. ``jacobi`` replaces J_ππ⁻¹ by its inverse diagonal, ``exact`` uses a sparse
    direct factorization.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["static", "dynamic", "jacobi", "exact"] = "static"
    level: int = Field(1, ge=0, le=4)
    laterals: bool = False
    n_ent: int = Field(0, ge=0)
    n_add: int = Field(1, ge=1)

    @model_validator(mode="after")
    def validate_dynamic(self) -> "PatternSpec":
        if self.kind == "dynamic" and self.n_ent > 0 and self.n_add > self.n_ent:
            raise ValueError(f"n_add ({self.n_add}) must not exceed n_ent ({self.n_ent})")
        return self

    @classmethod
    def from_letter(cls, letter: str | PatternLetter) -> "PatternSpec":
        key = PatternLetter(str(getattr(letter, "value", letter)).strip().upper())
        level, laterals = _LETTERS[key]
        return cls(kind="static", level=level, laterals=laterals)

    @classmethod
    def parse(cls, text: str) -> "PatternSpec":
        """Parse ``ORIG``, ``A``..``F``, ``jacobi``, ``exact`` or ``dyn:<n_ent>:<n_add>``."""
        raw = text.strip()
        low = raw.lower()
        if low in ("jacobi", "exact"):
            return cls(kind=low)
        if low.startswith("dyn"):
            parts = low.split(":")
            if len(parts) != 3:
                raise ValueError(f"dynamic pattern must look like dyn:<n_ent>:<n_add>, got {raw!r}")
            return cls(kind="dynamic", level=0, n_ent=int(parts[1]), n_add=int(parts[2]))
        try:
            return cls.from_letter(raw)
        except ValueError:
            raise ValueError(
                f"unknown pattern {raw!r}; expected ORIG, A-F, jacobi, exact or dyn:<n_ent>:<n_add>"
            ) from None

    @property
    def label(self) -> str:
        if self.kind == "static":
            for letter, shape in _LETTERS.items():
                if shape == (self.level, self.laterals):
                    return "Orig" if letter is PatternLetter.ORIG else letter.value
            return f"L{self.level}{'+lat' if self.laterals else ''}"
        if self.kind == "dynamic":
            return f"dyn({self.n_ent},{self.n_add})"
        return self.kind


# ---------------------------------------------------------------------------
# Settings groups
# ---------------------------------------------------------------------------


class LinearSettings(BaseModel):
    """Outer Krylov solve of the Newton system."""

    tol: float = Field(1e-6, gt=0, description="relative residual threshold τ_l")
    maxit: int = Field(300, ge=1)
    restart: Optional[int] = Field(None, ge=1, description="None runs full GMRES")


class AMGSettings(BaseModel):
    """Plain-aggregation AMG used for J_ππ and the Schur approximation."""

    theta: float = Field(0.08, ge=0, lt=1, description="strength-of-connection threshold")
    omega: float = Field(0.7, gt=0, le=1, description="damped-Jacobi weight")
    max_coarse: int = Field(200, ge=1, description="size at which the hierarchy stops")
    max_levels: int = Field(20, ge=1)


class PreconditionerSettings(BaseModel):
    """BCPR build and application knobs."""

    pattern: PatternSpec = Field(default_factory=PatternSpec)
    tau_inner: float = Field(1e-5, gt=0, description="inner GCR tolerance τ_i on S̃")
    inner_maxit: int = Field(15, ge=1)
    reuse: bool = Field(True, description="reuse J_ππ hierarchy and F̃ when gravity is off")
    workers: int = Field(1, ge=1, description="threads for EDFA column builds")
    amg: AMGSettings = Field(default_factory=AMGSettings)


class NewtonSettings(BaseModel):
    """Nonlinear loop: three-part residual test, chop, iteration cap."""

    tol_abs: float = Field(1e-6, gt=0, description="τ_nl,a on max part norm (m^3/d)")
    tol_rel: float = Field(1e-6, gt=0, description="τ_nl,r on max relative part norm")
    max_iter: int = Field(12, ge=1)
    chop: float = Field(0.2, gt=0, le=1, description="Appleyard ΔS_max")
    linear: LinearSettings = Field(default_factory=LinearSettings)
    precond: PreconditionerSettings = Field(default_factory=PreconditionerSettings)


class Schedule(BaseModel):
    """Time-step control (days)."""

    t_end: float = Field(..., gt=0)
    dt_init: float = Field(..., gt=0)
    dt_max: float = Field(..., gt=0)
    growth: float = Field(1.2, ge=1)
    max_cuts: int = Field(10, ge=0)
    max_steps: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def validate_steps(self) -> "Schedule":
        if self.dt_init > self.dt_max:
            raise ValueError(f"dt_init ({self.dt_init}) must not exceed dt_max ({self.dt_max})")
        return self


# ---------------------------------------------------------------------------
# Reports and metrics
# ---------------------------------------------------------------------------


class BuildReport(BaseModel):
    """Statistics of one BCPR build."""

    pattern: str = ""
    r_s: float = 1.0
    nnz_schur: int = 0
    nnz_schur_orig: int = 0
    columns: int = 0
    mean_pattern_size: float = 0.0
    max_pattern_size: int = 0
    restricted_solves: int = 0
    fallbacks: int = 0
    early_stops: int = 0
    reused: bool = False
    amg_levels_pi: List[int] = Field(default_factory=list)
    amg_levels_schur: List[int] = Field(default_factory=list)
    amg_stagnated: bool = False
    t_edfa: float = 0.0
    t_amg: float = 0.0
    t_setup: float = 0.0


class StepMetrics(BaseModel):
    """Monitoring values for one accepted time step."""

    step: int
    time: float
    dt: float
    newton_iterations: int = 0
    linear_iterations: int = 0
    t_p: float = 0.0
    t_s: float = 0.0
    t_t: float = 0.0
    first_linear_iterations: int = 0
    first_t_p: float = 0.0
    first_t_s: float = 0.0
    first_t_t: float = 0.0
    cuts: int = 0
    inner_failures: int = 0
    r_s: float = 1.0
    max_cfl: float = 0.0

    @field_validator("newton_iterations", "linear_iterations", "first_linear_iterations", "cuts")
    @classmethod
    def non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("counts must be >= 0")
        return v


class RunMetrics(BaseModel):
    """Per-step series with totals (hatted values) and first-system averages (barred values)."""

    steps: List[StepMetrics] = Field(default_factory=list)

    @property
    def total_newton(self) -> int:
        return sum(s.newton_iterations for s in self.steps)

    @property
    def total_linear(self) -> int:
        return sum(s.linear_iterations for s in self.steps)

    @property
    def total_t_p(self) -> float:
        return sum(s.t_p for s in self.steps)

    @property
    def total_t_s(self) -> float:
        return sum(s.t_s for s in self.steps)

    @property
    def total_t_t(self) -> float:
        return sum(s.t_t for s in self.steps)

    @property
    def max_cfl(self) -> float:
        return max((s.max_cfl for s in self.steps), default=0.0)

    def _mean(self, attr: str) -> float:
        values = [getattr(s, attr) for s in self.steps if s.newton_iterations > 0]
        return float(sum(values) / len(values)) if values else 0.0

    @property
    def mean_first_linear(self) -> float:
        return self._mean("first_linear_iterations")

    @property
    def mean_linear_per_system(self) -> float:
        return self.total_linear / self.total_newton if self.total_newton else 0.0

    def summary(self) -> Dict[str, float]:
        last_rs = self.steps[-1].r_s if self.steps else 1.0
        return {
            "steps": len(self.steps),
            "N_N": self.total_newton,
            "N_l": self.total_linear,
            "t_p": self.total_t_p,
            "t_s": self.total_t_s,
            "t_t": self.total_t_t,
            "N_l1": self.mean_first_linear,
            "t_p1": self._mean("first_t_p"),
            "t_s1": self._mean("first_t_s"),
            "t_t1": self._mean("first_t_t"),
            "cuts": sum(s.cuts for s in self.steps),
            "R_S": last_rs,
            "max_cfl": self.max_cfl,
        }


class BenchRow(BaseModel):
    """One pattern in a preconditioner benchmark on a fixed linear system."""

    pattern: str
    r_s: float
    iterations: int
    converged: bool
    t_p: float
    t_s: float
    mean_pattern_size: float = 0.0
    fallbacks: int = 0
    history: List[float] = Field(default_factory=list)


class JacobianDump(BaseModel):
    """Sidecar describing a Matrix Market dump of a block Jacobian."""

    n_f: int = Field(..., ge=0)
    n_p: int = Field(..., ge=0)
    n_s: int = Field(..., ge=0)
    blocks: Dict[str, str]
    rhs: Optional[str] = None
