"""Cell property files and field output.

Property files are whitespace-separated ASCII holding four blocks of ``nx·ny·nz`` values each,
``kx``, ``ky``, ``kz`` (m^2) and porosity, every block in x-fastest order. Field output is
legacy VTK with one hexahedron per cell.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from mhfeflow.errors import IngestionError, InvalidArgumentError
from mhfeflow.grid import HexMesh
from mhfeflow.physics import RockField, State

logger = logging.getLogger(__name__)

_TEMPLATES_DIR = Path(__file__).parent / "templates"

# reference corner order (i + 2j + 4k) -> VTK_HEXAHEDRON order
VTK_HEX_ORDER = (0, 1, 3, 2, 4, 5, 7, 6)
VTK_HEXAHEDRON = 12
VALUES_PER_LINE = 6


def template_env() -> Environment:
    return Environment(
        loader=FileSystemLoader(str(_TEMPLATES_DIR)),
        autoescape=False,
        undefined=StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def _parse_tokens(tokens: list[str]) -> np.ndarray:
    try:
        return np.array(tokens, dtype=float)
    except ValueError:
        for pos, tok in enumerate(tokens):
            try:
                float(tok)
            except ValueError:
                raise IngestionError(
                    f"non-numeric token {tok!r} at position {pos}", position=pos
                ) from None
        raise


def load_perm_ascii(
    path: str | Path, nx: int, ny: int, nz: int, porosity_floor: float = 1e-4
) -> RockField:
    """Read ``kx ky kz phi`` blocks; porosities below ``porosity_floor`` are raised to it."""
    p = Path(path)
    try:
        tokens = p.read_text(encoding="utf-8").split()
    except OSError as exc:
        raise IngestionError(f"cannot read property file {p}: {exc}") from exc
    n = nx * ny * nz
    if len(tokens) != 4 * n:
        raise IngestionError(
            f"{p}: expected {4 * n} values for a {nx}x{ny}x{nz} grid, found {len(tokens)}",
            position=min(len(tokens), 4 * n),
        )
    values = _parse_tokens(tokens)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        pos = int(bad[0])
        raise IngestionError(f"non-finite value at position {pos}", position=pos)
    kx, ky, kz, phi = values.reshape(4, n)
    perm = np.column_stack([kx, ky, kz])
    bad = np.flatnonzero(~(perm > 0).all(axis=1))
    if bad.size:
        cell = int(bad[0])
        axis = int(np.flatnonzero(perm[cell] <= 0)[0])
        pos = axis * n + cell
        raise IngestionError(f"non-positive permeability at position {pos}", position=pos)
    low = phi < porosity_floor
    if np.any(low):
        logger.warning(
            "porosity_clamped",
            extra={"cells": int(low.sum()), "floor": porosity_floor, "path": str(p)},
        )
        phi = np.where(low, porosity_floor, phi)
    logger.info("perm_loaded", extra={"path": str(p), "cells": n})
    return RockField(perm=perm, phi=phi, dims=(nx, ny, nz))


def write_perm_ascii(path: str | Path, field: RockField) -> Path:
    """Write ``field`` in the layout :func:`load_perm_ascii` reads, 17 significant digits."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    blocks = [field.perm[:, 0], field.perm[:, 1], field.perm[:, 2], field.phi]
    lines = []
    for block in blocks:
        for start in range(0, block.size, VALUES_PER_LINE):
            lines.append(" ".join(f"{v:.17g}" for v in block[start : start + VALUES_PER_LINE]))
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def write_fields_vtk(
    mesh: HexMesh, state: State, path: str | Path, title: str = "mhfeflow fields"
) -> Path:
    """Legacy-VTK unstructured grid with cell pressure and water saturation."""
    if state.p_elem.size != mesh.n_cells:
        raise InvalidArgumentError(
            f"state has {state.p_elem.size} cells, mesh has {mesh.n_cells}"
        )
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    cells = mesh.cells[:, list(VTK_HEX_ORDER)]
    text = template_env().get_template("fields.vtk.j2").render(
        title=title,
        time=state.time,
        points=[" ".join(f"{c:.10g}" for c in xyz) for xyz in mesh.nodes],
        cells=[" ".join(str(int(i)) for i in row) for row in cells],
        cell_type=VTK_HEXAHEDRON,
        n_cells=mesh.n_cells,
        fields={
            "pressure": [f"{v:.10g}" for v in state.p_elem],
            "water_saturation": [f"{v:.10g}" for v in state.sw],
        },
    )
    p.write_text(text, encoding="utf-8")
    logger.debug("vtk_written", extra={"path": str(p), "cells": mesh.n_cells})
    return p
