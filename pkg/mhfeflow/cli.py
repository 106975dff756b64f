"""Typer CLI for mhfeflow — simulation runs, matrix dumps and preconditioner studies."""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, Dict, NoReturn, Optional

import structlog
import typer
from rich.console import Console
from rich.table import Table

from mhfeflow.config import RunConfig, Settings, parse_config
from mhfeflow.errors import ConfigError, MhfeflowError

app = typer.Typer(
    name="mhfeflow",
    help="Fully implicit two-phase MHFE reservoir simulation with Block CPR preconditioning.",
    add_completion=False,
)
console = Console()

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _get_settings(
    log_level: Optional[str] = None,
    workers: Optional[int] = None,
    deterministic: Optional[bool] = None,
) -> Settings:
    overrides: Dict[str, Any] = {}
    if log_level:
        overrides["log_level"] = log_level.upper()
    if workers:
        overrides["workers"] = workers
    if deterministic is not None:
        overrides["deterministic"] = deterministic
    return Settings(**overrides)


def _setup_logging(level: str = "INFO", json_fmt: bool = False) -> None:
    renderer = (
        structlog.processors.JSONRenderer()
        if json_fmt
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    formatter = structlog.stdlib.ProcessorFormatter(
        processor=renderer,
        foreign_pre_chain=[
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.ExtraAdder(),
            structlog.processors.TimeStamper(fmt="iso"),
        ],
    )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


def _load_config(
    path: Path,
    pattern: Optional[str] = None,
    gravity: Optional[bool] = None,
    max_steps: Optional[int] = None,
) -> RunConfig:
    cfg = parse_config(path)
    updates: Dict[str, Any] = {}
    if pattern is not None:
        updates["pattern"] = pattern
    if gravity is not None:
        updates["gravity"] = gravity
    if max_steps is not None:
        updates["max_steps"] = max_steps
    if not updates:
        return cfg
    try:
        return RunConfig.model_validate({**cfg.model_dump(), **updates})
    except ValueError as exc:
        raise ConfigError(f"invalid override: {exc}") from exc


def _output_dir(option: Optional[Path], cfg: RunConfig, settings: Settings) -> Path:
    out = option or Path(cfg.output_dir or settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(settings: Settings) -> Optional[int]:
    """EDFA thread count from the environment or flags; None keeps the run file value."""
    if settings.deterministic or "workers" in settings.model_fields_set:
        return settings.effective_workers
    return None


def _fail(exc: Exception) -> NoReturn:
    if isinstance(exc, ConfigError):
        console.print(f"[bold red]Config error: {exc}[/]")
        raise typer.Exit(1)
    console.print(f"[bold red]Fatal: {exc}[/]")
    raise typer.Exit(2)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@app.command()
def run(
    config: Path = typer.Argument(..., help="Run file (key = value)."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Output folder."),
    pattern: Optional[str] = typer.Option(
        None, "--pattern", help="EDFA pattern: ORIG, A-F, jacobi, exact or dyn:<n_ent>:<n_add>."
    ),
    gravity: Optional[bool] = typer.Option(None, "--gravity/--no-gravity", help="Gravity."),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", help="Stop after N steps."),
    workers: Optional[int] = typer.Option(None, "--workers", help="EDFA build threads."),
    deterministic: bool = typer.Option(
        False, "--deterministic", is_flag=True, help="Single-threaded, reproducible builds."
    ),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: MHFEFLOW_LOG_LEVEL or INFO)."
    ),
    log_json: bool = typer.Option(False, "--log-json", is_flag=True, help="JSON log lines."),
) -> None:
    """Simulate a five-spot water flood and write metrics and fields."""
    settings = _get_settings(log_level, workers, deterministic or None)
    _setup_logging(settings.log_level, log_json or settings.log_json)

    from mhfeflow.export.fields import write_fields_vtk
    from mhfeflow.export.reports import dump_jacobian_mm, write_metrics_csv
    from mhfeflow.simulator.driver import timestep_driver
    from mhfeflow.simulator.scenario import scenario_from_config
    from mhfeflow.studies import first_jacobian

    try:
        cfg = _load_config(config, pattern, gravity, max_steps)
        out = _output_dir(output_dir, cfg, settings)
        (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
        scenario = scenario_from_config(cfg, workers=_threads(settings))
        if cfg.dump_first_jacobian:
            J, b, _ = first_jacobian(scenario)
            dump_jacobian_mm(J, out / "jacobian", rhs=b)

        console.print(
            f"[bold]Running {scenario.name}[/]  pattern={cfg.pattern_spec.label}  "
            f"gravity={'on' if cfg.gravity else 'off'}"
        )
        result = timestep_driver(scenario)
        write_metrics_csv(result.metrics, out / "metrics.csv")
        if cfg.write_vtk:
            write_fields_vtk(scenario.mesh, result.state, out / "fields.vtk")
    except MhfeflowError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(MhfeflowError(f"I/O error: {exc}"))

    _print_summary(result.metrics.summary())
    console.print(f"[green]Outputs written to {out}[/]")


@app.command("dump-matrices")
def dump_matrices(
    config: Path = typer.Argument(..., help="Run file (key = value)."),
    prefix: Optional[Path] = typer.Option(None, "--prefix", help="Output prefix for .mtx files."),
    gravity: Optional[bool] = typer.Option(None, "--gravity/--no-gravity", help="Gravity."),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: MHFEFLOW_LOG_LEVEL or INFO)."
    ),
) -> None:
    """Write the first Jacobian and its right-hand side in Matrix Market format."""
    settings = _get_settings(log_level)
    _setup_logging(settings.log_level, settings.log_json)

    from mhfeflow.export.reports import dump_jacobian_mm
    from mhfeflow.simulator.scenario import scenario_from_config
    from mhfeflow.studies import first_jacobian

    try:
        cfg = _load_config(config, gravity=gravity)
        target = prefix or _output_dir(None, cfg, settings) / "jacobian"
        J, b, _ = first_jacobian(scenario_from_config(cfg))
        sidecar = dump_jacobian_mm(J, target, rhs=b)
    except MhfeflowError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(MhfeflowError(f"I/O error: {exc}"))

    n_f, n_p, n_s = J.sizes
    console.print(f"[bold green]Dumped {n_f}+{n_p}+{n_s} unknowns[/]  sidecar={sidecar}")


@app.command("precond-bench")
def precond_bench(
    config: Path = typer.Argument(..., help="Run file (mesh and solver settings)."),
    matrices: Optional[Path] = typer.Option(
        None, "--matrices", help="Prefix of a dump to solve instead of assembling."
    ),
    patterns: str = typer.Option(
        "ORIG,A,B,C,D,E,F,jacobi", "--patterns", help="Comma-separated patterns to compare."
    ),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Output folder."),
    gravity: Optional[bool] = typer.Option(None, "--gravity/--no-gravity", help="Gravity."),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: MHFEFLOW_LOG_LEVEL or INFO)."
    ),
) -> None:
    """Compare EDFA patterns on one linear system: R_S, GMRES iterations and timings."""
    settings = _get_settings(log_level)
    _setup_logging(settings.log_level, settings.log_json)

    from mhfeflow.export.reports import load_jacobian_mm, render_bench_report
    from mhfeflow.models import PatternSpec
    from mhfeflow.simulator.scenario import scenario_from_config
    from mhfeflow.studies import first_jacobian, pattern_sweep

    try:
        cfg = _load_config(config, gravity=gravity)
        specs = [PatternSpec.parse(p) for p in patterns.split(",") if p.strip()]
        scenario = scenario_from_config(cfg)
        if matrices is not None:
            J, b = load_jacobian_mm(matrices)
            if b is None:
                raise ConfigError(f"dump {matrices} carries no right-hand side")
            if J.sizes[0] != scenario.mesh.n_faces or J.sizes[2] != scenario.mesh.n_cells:
                raise ConfigError(f"dump {matrices} does not match the configured mesh")
        else:
            J, b, _ = first_jacobian(scenario)
        newton = scenario.newton
        rows = pattern_sweep(J, b, scenario.mesh, specs, newton.precond, newton.linear)
        out = _output_dir(output_dir, cfg, settings)
        report = render_bench_report(
            rows,
            out / "bench_report.md",
            title=scenario.name,
            n_cells=scenario.mesh.n_cells,
            n_faces=scenario.mesh.n_faces,
            n_wells=scenario.model.n_w,
            gravity=cfg.gravity,
            tol=newton.linear.tol,
        )
    except MhfeflowError as exc:
        _fail(exc)
    except ValueError as exc:
        _fail(ConfigError(str(exc)))

    table = Table(title="Preconditioner benchmark")
    table.add_column("Pattern", style="bold")
    table.add_column("R_S", justify="right")
    table.add_column("GMRES its", justify="right")
    table.add_column("Converged")
    table.add_column("t_p (s)", justify="right")
    table.add_column("t_s (s)", justify="right")
    for row in rows:
        table.add_row(
            row.pattern,
            f"{row.r_s:.3f}",
            str(row.iterations),
            "✅" if row.converged else "❌",
            f"{row.t_p:.3f}",
            f"{row.t_s:.3f}",
        )
    console.print(table)
    console.print(f"[green]Report written to {report}[/]")


@app.command()
def study(
    config: Path = typer.Argument(..., help="Run file (key = value)."),
    kind: str = typer.Option("global", "--kind", help="global or blocks."),
    iterations: int = typer.Option(10, "--iterations", "-k", help="GMRES steps (global)."),
    pattern: Optional[str] = typer.Option(None, "--pattern", help="EDFA pattern (blocks)."),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: MHFEFLOW_LOG_LEVEL or INFO)."
    ),
) -> None:
    """Global-stage comparison or per-block AMG solvability on the first Jacobian."""
    settings = _get_settings(log_level)
    _setup_logging(settings.log_level, settings.log_json)

    from mhfeflow.simulator.scenario import scenario_from_config
    from mhfeflow.studies import block_solvability, first_jacobian, global_stage_study

    if kind not in ("global", "blocks"):
        console.print(f"[bold red]Config error: unknown study {kind!r}; use global or blocks[/]")
        raise typer.Exit(1)
    try:
        cfg = _load_config(config, pattern=pattern)
        scenario = scenario_from_config(cfg)
        J, b, _ = first_jacobian(scenario)
        if kind == "global":
            results = global_stage_study(J, b, k=iterations)
        else:
            results = block_solvability(
                J, scenario.mesh, cfg.pattern_spec, scenario.newton.precond.amg
            )
    except MhfeflowError as exc:
        _fail(exc)

    table = Table(title=f"{kind} study: {scenario.name}")
    table.add_column("Variant", style="bold")
    table.add_column("Iterations", justify="right")
    table.add_column("Final ‖r‖/‖r₀‖", justify="right")
    table.add_column("Converged")
    for name, res in results.items():
        table.add_row(
            name,
            str(res.iterations),
            f"{res.relative_residual:.3e}",
            "—" if kind == "global" else ("✅" if res.converged else "❌"),
        )
    console.print(table)


@app.command("generate-perm")
def generate_perm(
    output: Path = typer.Argument(..., help="Destination property file."),
    nx: int = typer.Option(20, "--nx"),
    ny: int = typer.Option(20, "--ny"),
    nz: int = typer.Option(4, "--nz"),
    k_mean: float = typer.Option(1e-13, "--k-mean", help="Geometric mean permeability (m^2)."),
    log_std: float = typer.Option(2.0, "--log-std", help="Standard deviation of ln k."),
    correlation: float = typer.Option(2.0, "--correlation", help="Smoothing length (cells)."),
    anisotropy: float = typer.Option(10.0, "--anisotropy", help="Ratio kx / kz."),
    phi_mean: float = typer.Option(0.2, "--phi-mean", help="Mean porosity."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed for reproducibility."),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: MHFEFLOW_LOG_LEVEL or INFO)."
    ),
) -> None:
    """Write a synthetic log-normal field as ``kx ky kz phi`` blocks."""
    settings = _get_settings(log_level)
    _setup_logging(settings.log_level, settings.log_json)

    from mhfeflow.export.fields import write_perm_ascii
    from mhfeflow.synthetic import SyntheticFieldGenerator

    try:
        props = SyntheticFieldGenerator(seed=seed).generate(
            nx, ny, nz, k_mean, log_std, correlation, anisotropy, phi_mean
        )
        write_perm_ascii(output, props)
    except MhfeflowError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(MhfeflowError(f"I/O error: {exc}"))

    console.print(
        f"[bold green]Wrote {nx * ny * nz} cells[/] to {output}  "
        f"(contrast {props.contrast_decades:.1f} decades, seed={seed})"
    )


# ---------------------------------------------------------------------------
# Private helpers
# ---------------------------------------------------------------------------


def _print_summary(summary: Dict[str, float]) -> None:
    table = Table(title="Run summary")
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    for key, value in summary.items():
        text = f"{value:.4g}" if isinstance(value, float) else str(value)
        table.add_row(key, text)
    console.print(table)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main() -> None:
    """CLI entry point registered in pyproject.toml."""
    app()


if __name__ == "__main__":
    main()
