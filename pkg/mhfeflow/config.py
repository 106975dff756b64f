"""Configuration: process settings from the environment and run files in ``key = value`` form.

Environment variables carry the ``MHFEFLOW_`` prefix (``MHFEFLOW_LOG_LEVEL=DEBUG``). A run file
holds one ``key = value`` pair per line; ``#`` starts a comment. Units: metres, days, kPa,
m^2 for permeability, kPa·d for viscosities, kPa/m for specific weights, 1/kPa for rock
compressibility and m^3/d for rates.
"""

from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Dict, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from mhfeflow.errors import ConfigError
from mhfeflow.models import (
    AMGSettings,
    LinearSettings,
    NewtonSettings,
    PatternSpec,
    PreconditionerSettings,
    Schedule,
)

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide knobs; run physics lives in :class:`RunConfig`."""

    model_config = SettingsConfigDict(
        env_prefix="MHFEFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # ── Logging ───────────────────────────────────────────────────────────────
    log_level: str = "INFO"
    log_json: bool = False

    # ── Execution ─────────────────────────────────────────────────────────────
    workers: int = Field(1, ge=1)
    deterministic: bool = False

    # ── Output ────────────────────────────────────────────────────────────────
    output_dir: str = "./runs"

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        valid = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        upper = v.upper()
        if upper not in valid:
            raise ValueError(f"log_level must be one of {valid}")
        return upper

    @property
    def effective_workers(self) -> int:
        """Deterministic mode pins EDFA column builds to one thread."""
        return 1 if self.deterministic else self.workers


@functools.lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return cached Settings singleton."""
    return Settings()


def get_log_level(settings: Settings) -> int:
    return getattr(logging, settings.log_level, logging.INFO)


class RunConfig(BaseModel):
    """One simulation run. Defaults reproduce the homogeneous desk five-spot."""

    model_config = ConfigDict(extra="forbid")

    # ── Grid ──────────────────────────────────────────────────────────────────
    nx: int = Field(..., ge=2)
    ny: int = Field(..., ge=2)
    nz: int = Field(..., ge=1)
    dx: float = Field(6.096, gt=0, description="cell size in x (m)")
    dy: float = Field(3.048, gt=0, description="cell size in y (m)")
    dz: float = Field(0.6096, gt=0, description="cell size in z (m)")
    dome_amplitude: float = Field(0.0, ge=0, description="dome uplift (m); 0 keeps the box")
    dome_radius: Optional[float] = Field(None, gt=0, description="dome radius (m)")

    # ── Rock ──────────────────────────────────────────────────────────────────
    perm: float = Field(1e-12, gt=0, description="isotropic permeability (m^2)")
    perm_file: Optional[str] = Field(None, description="ASCII kx ky kz phi per cell")
    porosity_floor: float = Field(1e-4, gt=0, lt=1)
    synthetic: bool = Field(False, description="generate a log-normal permeability field")
    synthetic_log_std: float = Field(2.0, gt=0, description="std of ln k")
    synthetic_correlation: float = Field(2.0, ge=0, description="smoothing length (cells)")
    synthetic_anisotropy: float = Field(10.0, ge=1, description="kx / kz")
    seed: int = 42
    phi0: float = Field(0.25, gt=0, lt=1, description="reference porosity")
    cr: float = Field(5e-7, ge=0, description="rock compressibility (1/kPa)")

    # ── Fluids ────────────────────────────────────────────────────────────────
    mu_o: float = Field(2.3148e-11, gt=0, description="oil viscosity (kPa·d)")
    mu_w: float = Field(1.1574e-11, gt=0, description="water viscosity (kPa·d)")
    gamma_o: float = Field(8.0, gt=0, description="oil specific weight (kPa/m)")
    gamma_w: float = Field(9.81, gt=0, description="water specific weight (kPa/m)")
    swr: float = Field(0.0, ge=0, lt=1)
    sor: float = Field(0.0, ge=0, lt=1)
    corey_exp: float = Field(2.0, ge=1)
    gravity: bool = False

    # ── Wells and initial state ───────────────────────────────────────────────
    rate: float = Field(20.0, ge=0, description="injection rate (m^3/d)")
    bhp: float = Field(490.0, description="producer bottom-hole pressure (kPa)")
    well_radius: float = Field(0.1, gt=0, description="well radius (m)")
    p_init: float = Field(500.0, description="initial pressure at the top (kPa)")
    sw_init: float = Field(0.0, ge=0, le=1)

    # ── Schedule ──────────────────────────────────────────────────────────────
    t_end: float = Field(..., gt=0, description="simulated time (d)")
    dt_init: float = Field(..., gt=0, description="first step (d)")
    dt_max: float = Field(..., gt=0, description="largest step (d)")
    dt_growth: float = Field(1.2, ge=1)
    max_cuts: int = Field(10, ge=0)
    max_steps: Optional[int] = Field(None, ge=0)

    # ── Solver ────────────────────────────────────────────────────────────────
    tol_nl_abs: float = Field(1e-6, gt=0)
    tol_nl_rel: float = Field(1e-6, gt=0)
    newton_maxit: int = Field(12, ge=1)
    chop: float = Field(0.2, gt=0, le=1)
    tol_linear: float = Field(1e-6, gt=0)
    gmres_maxit: int = Field(300, ge=1)
    gmres_restart: Optional[int] = Field(None, ge=1)
    pattern: str = "A"
    tau_inner: float = Field(1e-5, gt=0)
    inner_maxit: int = Field(15, ge=1)
    reuse: bool = True
    workers: int = Field(1, ge=1)
    amg_theta: float = Field(0.08, ge=0, lt=1)
    amg_omega: float = Field(0.7, gt=0, le=1)
    amg_max_coarse: int = Field(200, ge=1)

    # ── Output ────────────────────────────────────────────────────────────────
    output_dir: Optional[str] = None
    write_vtk: bool = True
    dump_first_jacobian: bool = False

    # ── Field validators ──────────────────────────────────────────────────────

    @field_validator(
        "dome_radius", "perm_file", "max_steps", "gmres_restart", "output_dir", mode="before"
    )
    @classmethod
    def parse_optional(cls, v: object) -> object:
        """Empty values and ``none`` mean unset."""
        if isinstance(v, str) and v.strip().lower() in ("", "none", "null"):
            return None
        return v

    @field_validator("pattern", mode="before")
    @classmethod
    def parse_pattern(cls, v: object) -> str:
        text = str(v).strip()
        spec = PatternSpec.parse(text)
        return text.upper() if spec.kind == "static" else text.lower()

    # ── Model validators ──────────────────────────────────────────────────────

    @model_validator(mode="after")
    def validate_schedule(self) -> "RunConfig":
        if self.dt_init > self.dt_max:
            raise ValueError(f"dt_init ({self.dt_init}) must not exceed dt_max ({self.dt_max})")
        return self

    @model_validator(mode="after")
    def validate_saturations(self) -> "RunConfig":
        if self.swr + self.sor >= 1.0:
            raise ValueError(f"swr + sor must be < 1, got {self.swr + self.sor}")
        if not self.swr <= self.sw_init <= 1.0 - self.sor:
            raise ValueError(f"sw_init ({self.sw_init}) outside [swr, 1 - sor]")
        return self

    @model_validator(mode="after")
    def validate_perm_source(self) -> "RunConfig":
        if self.perm_file and self.synthetic:
            raise ValueError("perm_file and synthetic are mutually exclusive")
        if self.dome_amplitude > 0 and self.dome_radius is None:
            raise ValueError("dome_amplitude needs dome_radius")
        return self

    # ── Derived settings ──────────────────────────────────────────────────────

    @property
    def pattern_spec(self) -> PatternSpec:
        return PatternSpec.parse(self.pattern)

    def schedule(self) -> Schedule:
        return Schedule(
            t_end=self.t_end,
            dt_init=self.dt_init,
            dt_max=self.dt_max,
            growth=self.dt_growth,
            max_cuts=self.max_cuts,
            max_steps=self.max_steps,
        )

    def newton_settings(self, workers: Optional[int] = None) -> NewtonSettings:
        return NewtonSettings(
            tol_abs=self.tol_nl_abs,
            tol_rel=self.tol_nl_rel,
            max_iter=self.newton_maxit,
            chop=self.chop,
            linear=LinearSettings(
                tol=self.tol_linear, maxit=self.gmres_maxit, restart=self.gmres_restart
            ),
            precond=PreconditionerSettings(
                pattern=self.pattern_spec,
                tau_inner=self.tau_inner,
                inner_maxit=self.inner_maxit,
                reuse=self.reuse,
                workers=workers or self.workers,
                amg=AMGSettings(
                    theta=self.amg_theta, omega=self.amg_omega, max_coarse=self.amg_max_coarse
                ),
            ),
        )

    def to_text(self) -> str:
        """Every field in run-file form, defaults included."""
        lines = []
        for name, value in self.model_dump().items():
            lines.append(f"{name} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


def _read_pairs(text: str) -> tuple[Dict[str, str], Dict[str, int]]:
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {raw.strip()!r}", lineno
            )
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if not key:
            raise ConfigError(f"line {lineno}: missing key", lineno)
        if key in values:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})", lineno
            )
        values[key] = value
        lines[key] = lineno
    return values, lines


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    """Validate run-file text; errors name the offending line."""
    values, lines = _read_pairs(text)
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        errors = exc.errors()
        missing = [str(e["loc"][0]) for e in errors if e["type"] == "missing"]
        if missing:
            raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}") from exc
        first = errors[0]
        key = str(first["loc"][0]) if first["loc"] else ""
        line = lines.get(key)
        where = f"line {line}" if line is not None else "config"
        if first["type"] == "extra_forbidden":
            message = f"unknown key {key!r}"
        elif key:
            message = f"{key}: {first['msg']}"
        else:
            message = first["msg"]
        raise ConfigError(f"{source}: {where}: {message}", line) from exc


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a run file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    cfg = parse_config_text(text, source=str(p))
    logger.debug("config_parsed", extra={"path": str(p), "pattern": cfg.pattern})
    return cfg
