"""Geometric face patterns for the static EDFA columns.

A pattern of level ``L`` around cell ``q`` holds the six faces of ``q`` and, walking ``L``
cells away from ``q`` along each of the six local directions, the far face of every visited
cell. With ``laterals`` the four side faces of each visited cell are added as well. Walks stop
at the domain boundary.
"""

from __future__ import annotations

import numpy as np

from mhfeflow.errors import InvalidArgumentError
from mhfeflow.grid import HexMesh
from mhfeflow.models import PatternSpec

MAX_LEVEL = 4

# local face -> the four faces orthogonal to its axis
_SIDES = np.array([[j for j in range(6) if j // 2 != d // 2] for d in range(6)])


def static_pattern(mesh: HexMesh, cell: int, level: int, laterals: bool = False) -> np.ndarray:
    """Sorted face indices of the level-``level`` pattern around ``cell``."""
    if not 0 <= cell < mesh.n_cells:
        raise InvalidArgumentError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    if not 0 <= level <= MAX_LEVEL:
        raise InvalidArgumentError(f"pattern level must be in [0, {MAX_LEVEL}], got {level}")
    cf = mesh.cell_faces
    faces = set(cf[cell].tolist())
    for d in range(6):
        cur = cell
        for _ in range(level):
            nxt = mesh.neighbor(cur, d)
            if nxt < 0:
                break
            faces.add(int(cf[nxt, d]))
            if laterals:
                faces.update(cf[nxt, _SIDES[d]].tolist())
            cur = nxt
    return np.array(sorted(faces), dtype=np.int64)


def pattern_for(mesh: HexMesh, cell: int, spec: PatternSpec) -> np.ndarray:
    """Starting pattern of a column: the static pattern, or the cell's faces otherwise."""
    if spec.kind == "static":
        return static_pattern(mesh, cell, spec.level, spec.laterals)
    return static_pattern(mesh, cell, 0)
