"""Property files, field output, metrics tables and matrix dumps."""

from mhfeflow.export.fields import (
    load_perm_ascii,
    write_fields_vtk,
    write_perm_ascii,
)
from mhfeflow.export.reports import (
    METRICS_COLUMNS,
    dump_jacobian_mm,
    load_jacobian_mm,
    metrics_frame,
    render_bench_report,
    write_metrics_csv,
)

__all__ = [
    "METRICS_COLUMNS",
    "dump_jacobian_mm",
    "load_jacobian_mm",
    "load_perm_ascii",
    "metrics_frame",
    "render_bench_report",
    "write_fields_vtk",
    "write_metrics_csv",
    "write_perm_ascii",
]
