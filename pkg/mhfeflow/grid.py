"""Hexahedral meshes: Cartesian construction, dome deformation, topology and geometry.

Conventions
-----------
* z is depth and grows downward.
* Cell nodes follow the reference-cube corner ordering ``n = i + 2 j + 4 k`` for the corner
  ``(i, j, k)`` of ``[0, 1]^3``.
* Local faces of a cell are ordered ``x-, x+, y-, y+, z-, z+``.
* Each face carries its own orientation (node order, right-hand rule); ``cell_face_sign`` is
  +1 when that orientation points out of the cell.
* ``face_cells[f, 0]`` is the cell the face normal points out of (the only cell on a boundary
  face), ``face_cells[f, 1]`` the cell it points into, or -1 on the boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from mhfeflow.errors import GeometryError, InvalidArgumentError

logger = logging.getLogger(__name__)

# Six-tetrahedra split of the hexahedron along the 0-7 diagonal.
_TETS = np.array(
    [
        [0, 1, 3, 7],
        [0, 3, 2, 7],
        [0, 2, 6, 7],
        [0, 6, 4, 7],
        [0, 4, 5, 7],
        [0, 5, 1, 7],
    ]
)

_GAUSS_2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])

OUTWARD_SIGN = np.array([-1, 1, -1, 1, -1, 1])


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Immutable hexahedral mesh with topology and derived geometry.

    Parameters
    ----------
    nodes:
        ``(n_nodes, 3)`` coordinates in metres.
    cells:
        ``(n_cells, 8)`` node indices in reference-corner order.
    faces:
        ``(n_faces, 4)`` node indices in cyclic order.
    cell_faces:
        ``(n_cells, 6)`` face indices in local order ``x-, x+, y-, y+, z-, z+``.
    cell_face_sign:
        ``(n_cells, 6)`` +1 where the face orientation is outward for the cell.
    dims:
        ``(nx, ny, nz)`` for meshes built by :func:`build_cartesian` (kept through
        deformation), ``None`` otherwise.
    """

    nodes: np.ndarray
    cells: np.ndarray
    faces: np.ndarray
    cell_faces: np.ndarray
    cell_face_sign: np.ndarray
    dims: tuple[int, int, int] | None = None

    face_cells: np.ndarray = field(init=False, repr=False)
    face_local: np.ndarray = field(init=False, repr=False)
    cell_centroid: np.ndarray = field(init=False, repr=False)
    cell_volume: np.ndarray = field(init=False, repr=False)
    face_centroid: np.ndarray = field(init=False, repr=False)
    face_area: np.ndarray = field(init=False, repr=False)
    face_vector_area: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        face_cells, face_local = _face_adjacency(
            self.cell_faces, self.cell_face_sign, len(self.faces)
        )
        volume, centroid = _cell_volumes(self.nodes[self.cells])
        bad = np.flatnonzero(~(volume > 0.0))
        if bad.size:
            cell = int(bad[0])
            raise GeometryError(
                f"cell {cell} has non-positive volume {volume[cell]:.6g} m^3", cell=cell
            )
        f_centroid, f_area, f_vec = _face_geometry(self.nodes[self.faces])

        for name, value in (
            ("face_cells", face_cells),
            ("face_local", face_local),
            ("cell_centroid", centroid),
            ("cell_volume", volume),
            ("face_centroid", f_centroid),
            ("face_area", f_area),
            ("face_vector_area", f_vec),
        ):
            object.__setattr__(self, name, value)
        for arr in (
            self.nodes,
            self.cells,
            self.faces,
            self.cell_faces,
            self.cell_face_sign,
            face_cells,
            face_local,
            centroid,
            volume,
            f_centroid,
            f_area,
            f_vec,
        ):
            arr.flags.writeable = False

    # ------------------------------------------------------------------
    # Sizes and derived views
    # ------------------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def boundary_flag(self) -> np.ndarray:
        return self.face_cells[:, 1] < 0

    @property
    def cell_depth(self) -> np.ndarray:
        """Depth z^E of every cell centroid (m)."""
        return self.cell_centroid[:, 2]

    @property
    def face_depth(self) -> np.ndarray:
        """Depth of every face centroid (m)."""
        return self.face_centroid[:, 2]

    @property
    def cell_extents(self) -> np.ndarray:
        """``(n_cells, 3)`` distances between opposite face centroids (Δx, Δy, Δz)."""
        fc = self.face_centroid[self.cell_faces]
        return np.linalg.norm(fc[:, 1::2, :] - fc[:, 0::2, :], axis=2)

    def neighbor(self, cell: int, local_face: int) -> int:
        """Cell across ``local_face`` of ``cell``, or -1 on the boundary."""
        f = self.cell_faces[cell, local_face]
        c0, c1 = self.face_cells[f]
        return int(c1) if c0 == cell else int(c0)

    def closure_defect(self) -> np.ndarray:
        """Per-cell norm of the summed outward vector areas, relative to the cell's face areas."""
        vec = self.face_vector_area[self.cell_faces] * self.cell_face_sign[:, :, None]
        total = np.linalg.norm(vec.sum(axis=1), axis=1)
        scale = self.face_area[self.cell_faces].sum(axis=1)
        return total / scale

    def with_nodes(self, nodes: np.ndarray) -> "HexMesh":
        """Return a mesh with the same topology and new node coordinates."""
        nodes = np.array(nodes, dtype=float)
        if nodes.shape != self.nodes.shape:
            raise InvalidArgumentError(
                f"node array shape {nodes.shape} does not match mesh {self.nodes.shape}"
            )
        return HexMesh(
            nodes=nodes,
            cells=self.cells.copy(),
            faces=self.faces.copy(),
            cell_faces=self.cell_faces.copy(),
            cell_face_sign=self.cell_face_sign.copy(),
            dims=self.dims,
        )


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def build_cartesian(
    nx: int,
    ny: int,
    nz: int,
    dx: float,
    dy: float,
    dz: float,
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> HexMesh:
    """Build an ``nx × ny × nz`` Cartesian mesh, cells ordered x fastest, z downward."""
    for name, value in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(value) != value or value < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    for name, value in (("dx", dx), ("dy", dy), ("dz", dz)):
        if not value > 0:
            raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")
    nx, ny, nz = int(nx), int(ny), int(nz)

    gx, gy, gz = np.meshgrid(
        np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij"
    )

    def node_ids(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    n_nodes = (nx + 1) * (ny + 1) * (nz + 1)
    nodes = np.empty((n_nodes, 3))
    ids = node_ids(gx, gy, gz).ravel()
    nodes[ids, 0] = origin[0] + gx.ravel() * dx
    nodes[ids, 1] = origin[1] + gy.ravel() * dy
    nodes[ids, 2] = origin[2] + gz.ravel() * dz

    iz, iy, ix = np.unravel_index(np.arange(nx * ny * nz), (nz, ny, nx))
    cells = np.empty((ix.size, 8), dtype=np.int64)
    for k in range(2):
        for j in range(2):
            for i in range(2):
                cells[:, i + 2 * j + 4 * k] = node_ids(ix + i, iy + j, iz + k)

    n_x = (nx + 1) * ny * nz
    n_y = nx * (ny + 1) * nz
    n_z = nx * ny * (nz + 1)

    def fx(i, j, k):
        return i + (nx + 1) * (j + ny * k)

    def fy(i, j, k):
        return n_x + i + nx * (j + (ny + 1) * k)

    def fz(i, j, k):
        return n_x + n_y + i + nx * (j + ny * k)

    cell_faces = np.stack(
        [
            fx(ix, iy, iz),
            fx(ix + 1, iy, iz),
            fy(ix, iy, iz),
            fy(ix, iy + 1, iz),
            fz(ix, iy, iz),
            fz(ix, iy, iz + 1),
        ],
        axis=1,
    ).astype(np.int64)
    cell_face_sign = np.tile(OUTWARD_SIGN, (ix.size, 1))

    faces = np.empty((n_x + n_y + n_z, 4), dtype=np.int64)
    kx, jx, ixx = np.unravel_index(np.arange(n_x), (nz, ny, nx + 1))
    faces[fx(ixx, jx, kx)] = np.stack(
        [
            node_ids(ixx, jx, kx),
            node_ids(ixx, jx + 1, kx),
            node_ids(ixx, jx + 1, kx + 1),
            node_ids(ixx, jx, kx + 1),
        ],
        axis=1,
    )
    ky, jy, iyy = np.unravel_index(np.arange(n_y), (nz, ny + 1, nx))
    faces[fy(iyy, jy, ky)] = np.stack(
        [
            node_ids(iyy, jy, ky),
            node_ids(iyy, jy, ky + 1),
            node_ids(iyy + 1, jy, ky + 1),
            node_ids(iyy + 1, jy, ky),
        ],
        axis=1,
    )
    kz, jz, izz = np.unravel_index(np.arange(n_z), (nz + 1, ny, nx))
    faces[fz(izz, jz, kz)] = np.stack(
        [
            node_ids(izz, jz, kz),
            node_ids(izz + 1, jz, kz),
            node_ids(izz + 1, jz + 1, kz),
            node_ids(izz, jz + 1, kz),
        ],
        axis=1,
    )

    mesh = HexMesh(
        nodes=nodes,
        cells=cells,
        faces=faces,
        cell_faces=cell_faces,
        cell_face_sign=cell_face_sign,
        dims=(nx, ny, nz),
    )
    logger.debug(
        "mesh_built",
        extra={"nx": nx, "ny": ny, "nz": nz, "cells": mesh.n_cells, "faces": mesh.n_faces},
    )
    return mesh


def deform_dome(
    mesh: HexMesh,
    amplitude: float,
    radius: float,
    apex: tuple[float, float] | None = None,
) -> HexMesh:
    """Uplift node depths by a cosine bell ``A · (1 + cos(π r / R)) / 2`` inside ``r < R``.

    The apex defaults to the horizontal centre of the mesh. Every layer receives the same shift,
    so cell thicknesses are preserved.
    """
    if mesh.dims is None:
        raise InvalidArgumentError("deform_dome expects a mesh built by build_cartesian")
    if amplitude < 0:
        raise InvalidArgumentError(f"amplitude must be >= 0, got {amplitude!r}")
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be > 0, got {radius!r}")
    if apex is None:
        lo = mesh.nodes[:, :2].min(axis=0)
        hi = mesh.nodes[:, :2].max(axis=0)
        apex = tuple(0.5 * (lo + hi))

    nodes = np.array(mesh.nodes)
    r = np.hypot(nodes[:, 0] - apex[0], nodes[:, 1] - apex[1])
    bell = np.where(r < radius, 0.5 * (1.0 + np.cos(np.pi * r / radius)), 0.0)
    nodes[:, 2] -= amplitude * bell
    return mesh.with_nodes(nodes)


def tilt(mesh: HexMesh, slope_x: float, slope_y: float) -> HexMesh:
    """Shift depths linearly in x and y; every cell becomes a parallelepiped."""
    nodes = np.array(mesh.nodes)
    x0, y0 = nodes[:, 0].min(), nodes[:, 1].min()
    nodes[:, 2] += slope_x * (nodes[:, 0] - x0) + slope_y * (nodes[:, 1] - y0)
    return mesh.with_nodes(nodes)


def cell_geometry(mesh: HexMesh, cell: int) -> tuple[np.ndarray, float, float]:
    """Return ``(centroid, volume, depth)`` of one cell."""
    if not 0 <= cell < mesh.n_cells:
        raise InvalidArgumentError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    centroid = np.array(mesh.cell_centroid[cell])
    return centroid, float(mesh.cell_volume[cell]), float(centroid[2])


# ---------------------------------------------------------------------------
# Private helpers
# ---------------------------------------------------------------------------


def _face_adjacency(
    cell_faces: np.ndarray, cell_face_sign: np.ndarray, n_faces: int
) -> tuple[np.ndarray, np.ndarray]:
    flat_f = cell_faces.ravel()
    flat_c = np.repeat(np.arange(cell_faces.shape[0]), 6)
    flat_l = np.tile(np.arange(6), cell_faces.shape[0])
    plus = cell_face_sign.ravel() > 0

    n_plus = np.bincount(flat_f[plus], minlength=n_faces)
    n_minus = np.bincount(flat_f[~plus], minlength=n_faces)
    if np.any(n_plus > 1) or np.any(n_minus > 1) or np.any(n_plus + n_minus == 0):
        f = int(np.flatnonzero((n_plus > 1) | (n_minus > 1) | (n_plus + n_minus == 0))[0])
        raise GeometryError(f"face {f} is not shared by one or two consistently oriented cells")

    face_cells = np.full((n_faces, 2), -1, dtype=np.int64)
    face_local = np.full((n_faces, 2), -1, dtype=np.int64)
    face_cells[flat_f[plus], 0] = flat_c[plus]
    face_local[flat_f[plus], 0] = flat_l[plus]
    mf = flat_f[~plus]
    slot = np.where(n_plus[mf] > 0, 1, 0)
    face_cells[mf, slot] = flat_c[~plus]
    face_local[mf, slot] = flat_l[~plus]
    return face_cells, face_local


def _cell_volumes(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Volumes and centroids of hexahedra from their six-tetrahedra decomposition."""
    tets = corners[:, _TETS, :]  # (n, 6, 4, 3)
    a, b, c, d = (tets[:, :, i, :] for i in range(4))
    vol = np.einsum("nti,nti->nt", b - a, np.cross(c - a, d - a)) / 6.0
    centroids = tets.mean(axis=2)
    volume = vol.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        centroid = np.einsum("nt,nti->ni", vol, centroids) / volume[:, None]
    return volume, centroid


def _face_geometry(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centroid, area and vector area of bilinear quadrilaterals."""
    x0, x1, x2, x3 = (corners[:, i, :] for i in range(4))
    vector_area = 0.5 * np.cross(x2 - x0, x3 - x1)
    area = np.zeros(corners.shape[0])
    moment = np.zeros((corners.shape[0], 3))
    for s in _GAUSS_2:
        for t in _GAUSS_2:
            xs = (1 - t) * (x1 - x0) + t * (x2 - x3)
            xt = (1 - s) * (x3 - x0) + s * (x2 - x1)
            jac = 0.25 * np.linalg.norm(np.cross(xs, xt), axis=1)
            point = (1 - s) * (1 - t) * x0 + s * (1 - t) * x1 + s * t * x2 + (1 - s) * t * x3
            area += jac
            moment += jac[:, None] * point
    return moment / area[:, None], area, vector_area
