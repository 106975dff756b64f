"""Run metrics CSV, Matrix Market dumps of the block Jacobian and benchmark reports."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from mhfeflow.discretization.assembly import BLOCK_NAMES, BlockJacobian
from mhfeflow.errors import IngestionError, InvalidArgumentError
from mhfeflow.export.fields import template_env
from mhfeflow.linalg.mmio import read_matrix_market, write_matrix_market
from mhfeflow.models import BenchRow, JacobianDump, RunMetrics

logger = logging.getLogger(__name__)

# Stable CSV column set; the summary row carries run totals and first-system averages.
METRICS_COLUMNS = (
    "step",
    "time",
    "dt",
    "N_N",
    "N_l",
    "t_p",
    "t_s",
    "t_t",
    "N_l1",
    "t_p1",
    "t_s1",
    "t_t1",
    "cuts",
    "inner_failures",
    "R_S",
    "max_cfl",
)

SUMMARY_LABEL = "total"


def metrics_frame(metrics: RunMetrics) -> pd.DataFrame:
    rows = [
        {
            "step": s.step,
            "time": s.time,
            "dt": s.dt,
            "N_N": s.newton_iterations,
            "N_l": s.linear_iterations,
            "t_p": s.t_p,
            "t_s": s.t_s,
            "t_t": s.t_t,
            "N_l1": s.first_linear_iterations,
            "t_p1": s.first_t_p,
            "t_s1": s.first_t_s,
            "t_t1": s.first_t_t,
            "cuts": s.cuts,
            "inner_failures": s.inner_failures,
            "R_S": s.r_s,
            "max_cfl": s.max_cfl,
        }
        for s in metrics.steps
    ]
    summary = metrics.summary()
    rows.append(
        {
            "step": SUMMARY_LABEL,
            "time": metrics.steps[-1].time if metrics.steps else 0.0,
            "dt": np.nan,
            "N_N": summary["N_N"],
            "N_l": summary["N_l"],
            "t_p": summary["t_p"],
            "t_s": summary["t_s"],
            "t_t": summary["t_t"],
            "N_l1": summary["N_l1"],
            "t_p1": summary["t_p1"],
            "t_s1": summary["t_s1"],
            "t_t1": summary["t_t1"],
            "cuts": summary["cuts"],
            "inner_failures": sum(s.inner_failures for s in metrics.steps),
            "R_S": summary["R_S"],
            "max_cfl": summary["max_cfl"],
        }
    )
    return pd.DataFrame(rows, columns=list(METRICS_COLUMNS))


def write_metrics_csv(metrics: RunMetrics, path: str | Path) -> Path:
    """One row per accepted step followed by a ``total`` summary row."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    metrics_frame(metrics).to_csv(p, index=False, float_format="%.10g")
    logger.debug("metrics_written", extra={"path": str(p), "steps": len(metrics.steps)})
    return p


def _sidecar_path(prefix: Path) -> Path:
    return prefix.parent / f"{prefix.name}_blocks.json"


def dump_jacobian_mm(
    jacobian: BlockJacobian, prefix: str | Path, rhs: Optional[np.ndarray] = None
) -> Path:
    """Write the nine blocks as ``<prefix>_<block>.mtx`` and a JSON sidecar with block sizes.

    ``rhs`` (optional) is stored as a one-column ``<prefix>_rhs.mtx``. Returns the sidecar path.
    """
    prefix = Path(prefix)
    if rhs is not None and np.asarray(rhs).size != jacobian.n:
        raise InvalidArgumentError(
            f"rhs has {np.asarray(rhs).size} entries, system has {jacobian.n}"
        )
    names = {}
    for name, block in jacobian.blocks().items():
        target = prefix.parent / f"{prefix.name}_{name}.mtx"
        write_matrix_market(block, target, comment=f"J_{name}")
        names[name] = target.name
    rhs_name = None
    if rhs is not None:
        target = prefix.parent / f"{prefix.name}_rhs.mtx"
        write_matrix_market(np.asarray(rhs, dtype=float).reshape(-1, 1), target, comment="rhs")
        rhs_name = target.name
    n_f, n_p, n_s = jacobian.sizes
    sidecar = JacobianDump(n_f=n_f, n_p=n_p, n_s=n_s, blocks=names, rhs=rhs_name)
    out = _sidecar_path(prefix)
    out.write_text(sidecar.model_dump_json(indent=2), encoding="utf-8")
    logger.info("jacobian_dumped", extra={"prefix": str(prefix), "size": jacobian.n})
    return out


def load_jacobian_mm(prefix: str | Path) -> tuple[BlockJacobian, Optional[np.ndarray]]:
    """Read a dump written by :func:`dump_jacobian_mm`; block shapes are checked against the
    sidecar."""
    prefix = Path(prefix)
    side = _sidecar_path(prefix)
    try:
        meta = JacobianDump.model_validate_json(side.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(f"cannot read Jacobian sidecar {side}: {exc}") from exc
    missing = [name for name in BLOCK_NAMES if name not in meta.blocks]
    if missing:
        raise IngestionError(f"{side}: missing blocks {', '.join(missing)}")
    dims = {"pi": meta.n_f, "p": meta.n_p, "s": meta.n_s}
    blocks = {}
    for name in BLOCK_NAMES:
        row, col = _block_axes(name)
        A = read_matrix_market(side.parent / meta.blocks[name])
        if A.shape != (dims[row], dims[col]):
            raise IngestionError(
                f"block {name} has shape {A.shape}, sidecar says {(dims[row], dims[col])}"
            )
        blocks[name] = A
    rhs = None
    if meta.rhs:
        rhs = read_matrix_market(side.parent / meta.rhs).toarray().ravel()
    return BlockJacobian(**blocks), rhs


def _block_axes(name: str) -> tuple[str, str]:
    # block names are row + column axis names out of "pi", "p", "s"
    for row in ("pi", "p", "s"):
        if name.startswith(row) and name[len(row) :] in ("pi", "p", "s"):
            return row, name[len(row) :]
    raise InvalidArgumentError(f"unknown block name {name!r}")


def render_bench_report(
    rows: Sequence[BenchRow],
    path: str | Path,
    *,
    title: str,
    n_cells: int,
    n_faces: int,
    n_wells: int,
    gravity: bool,
    tol: float,
) -> Path:
    """Markdown table of a pattern sweep."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    text = template_env().get_template("bench_report.md.j2").render(
        title=title,
        rows=rows,
        n_cells=n_cells,
        n_faces=n_faces,
        n_wells=n_wells,
        gravity=gravity,
        tol=tol,
    )
    p.write_text(text, encoding="utf-8")
    return p
