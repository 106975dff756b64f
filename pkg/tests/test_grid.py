"""Tests for mhfeflow.grid — Cartesian construction, deformation, topology and geometry."""

from __future__ import annotations

import numpy as np
import pytest

from mhfeflow.errors import GeometryError, InvalidArgumentError
from mhfeflow.grid import HexMesh, build_cartesian, cell_geometry, deform_dome, tilt

from tests.conftest import CELL


def tet_volume_oracle(corners: np.ndarray) -> float:
    """Five-tetrahedra split of a hexahedron with planar faces."""
    tets = [(0, 1, 2, 4), (1, 3, 2, 7), (1, 4, 5, 7), (2, 4, 7, 6), (1, 2, 4, 7)]
    total = 0.0
    for a, b, c, d in tets:
        u, v, w = corners[b] - corners[a], corners[c] - corners[a], corners[d] - corners[a]
        total += abs(np.dot(u, np.cross(v, w))) / 6.0
    return total


class TestBuildCartesian:
    def test_counts(self) -> None:
        mesh = build_cartesian(3, 2, 2, 1.0, 1.0, 1.0)
        assert mesh.n_cells == 12
        assert mesh.n_nodes == 4 * 3 * 3
        assert mesh.n_faces == 4 * 2 * 2 + 3 * 3 * 2 + 3 * 2 * 3
        assert mesh.dims == (3, 2, 2)

    def test_boundary_face_count(self) -> None:
        mesh = build_cartesian(3, 2, 2, 1.0, 1.0, 1.0)
        assert int(mesh.boundary_flag.sum()) == 2 * (2 * 2 + 3 * 2 + 3 * 2)

    def test_volumes_and_extents(self, box_mesh) -> None:
        dx, dy, dz = CELL
        np.testing.assert_allclose(box_mesh.cell_volume, dx * dy * dz, rtol=1e-12)
        np.testing.assert_allclose(box_mesh.cell_extents, np.tile(CELL, (32, 1)), rtol=1e-12)

    def test_corner_ordering(self) -> None:
        mesh = build_cartesian(2, 2, 2, 1.0, 2.0, 3.0)
        corners = mesh.nodes[mesh.cells[0]]
        for k in range(2):
            for j in range(2):
                for i in range(2):
                    np.testing.assert_allclose(
                        corners[i + 2 * j + 4 * k], [i * 1.0, j * 2.0, k * 3.0]
                    )

    def test_depth_grows_with_layer(self) -> None:
        mesh = build_cartesian(2, 2, 3, 1.0, 1.0, 1.0)
        depths = mesh.cell_depth.reshape(3, 4)
        assert np.all(np.diff(depths[:, 0]) > 0)

    def test_x_fastest_ordering(self) -> None:
        mesh = build_cartesian(3, 2, 1, 1.0, 1.0, 1.0)
        np.testing.assert_allclose(mesh.cell_centroid[:3, 0], [0.5, 1.5, 2.5])
        assert mesh.cell_centroid[3, 1] == pytest.approx(1.5)

    def test_shared_face_adjacency(self) -> None:
        mesh = build_cartesian(2, 1, 1, 1.0, 1.0, 1.0)
        f = mesh.cell_faces[0, 1]
        assert mesh.cell_faces[1, 0] == f
        assert tuple(mesh.face_cells[f]) == (0, 1)

    def test_neighbor(self) -> None:
        mesh = build_cartesian(3, 3, 1, 1.0, 1.0, 1.0)
        assert mesh.neighbor(4, 0) == 3
        assert mesh.neighbor(4, 1) == 5
        assert mesh.neighbor(4, 2) == 1
        assert mesh.neighbor(4, 3) == 7
        assert mesh.neighbor(4, 4) == -1
        assert mesh.neighbor(0, 0) == -1

    def test_closed_cells(self, box_mesh) -> None:
        assert box_mesh.closure_defect().max() < 1e-12

    def test_arrays_are_read_only(self, box_mesh) -> None:
        with pytest.raises(ValueError):
            box_mesh.nodes[0, 0] = 1.0

    @pytest.mark.parametrize("dims", [(0, 1, 1), (2, -1, 1), (1, 1, 1.5)])
    def test_rejects_bad_dimensions(self, dims) -> None:
        with pytest.raises(InvalidArgumentError):
            build_cartesian(*dims, 1.0, 1.0, 1.0)

    def test_rejects_non_positive_spacing(self) -> None:
        with pytest.raises(InvalidArgumentError):
            build_cartesian(2, 2, 2, 1.0, 0.0, 1.0)


class TestDeformation:
    def test_dome_volumes_positive(self) -> None:
        mesh = deform_dome(build_cartesian(10, 10, 2, *CELL), amplitude=2.0, radius=40.0)
        assert mesh.n_cells == 200
        assert np.all(mesh.cell_volume > 0)

    def test_dome_apex_uplift(self) -> None:
        mesh = deform_dome(build_cartesian(10, 10, 2, *CELL), amplitude=2.0, radius=40.0)
        assert mesh.nodes[:, 2].min() == pytest.approx(-2.0)

    def test_dome_preserves_thickness(self, dome_mesh) -> None:
        corners = dome_mesh.nodes[dome_mesh.cells]
        np.testing.assert_allclose(corners[:, 4:, 2] - corners[:, :4, 2], CELL[2], rtol=1e-12)

    def test_dome_cells_stay_closed(self, dome_mesh) -> None:
        assert dome_mesh.closure_defect().max() < 1e-12

    def test_dome_keeps_topology(self, box_mesh) -> None:
        mesh = deform_dome(box_mesh, amplitude=0.5, radius=20.0)
        np.testing.assert_array_equal(mesh.cell_faces, box_mesh.cell_faces)
        np.testing.assert_array_equal(mesh.face_cells, box_mesh.face_cells)
        assert mesh.dims == box_mesh.dims

    def test_dome_requires_cartesian_origin(self, box_mesh) -> None:
        bare = HexMesh(
            nodes=np.array(box_mesh.nodes),
            cells=np.array(box_mesh.cells),
            faces=np.array(box_mesh.faces),
            cell_faces=np.array(box_mesh.cell_faces),
            cell_face_sign=np.array(box_mesh.cell_face_sign),
        )
        with pytest.raises(InvalidArgumentError):
            deform_dome(bare, 1.0, 10.0)

    def test_dome_rejects_bad_radius(self, box_mesh) -> None:
        with pytest.raises(InvalidArgumentError):
            deform_dome(box_mesh, 1.0, 0.0)

    def test_tilt_volume_matches_tet_oracle(self, box_mesh) -> None:
        mesh = tilt(box_mesh, 0.05, -0.02)
        for cell in range(mesh.n_cells):
            oracle = tet_volume_oracle(mesh.nodes[mesh.cells[cell]])
            assert mesh.cell_volume[cell] == pytest.approx(oracle, rel=1e-12)

    def test_inverted_mesh_is_rejected(self, box_mesh) -> None:
        with pytest.raises(GeometryError) as info:
            box_mesh.with_nodes(box_mesh.nodes * np.array([1.0, 1.0, -1.0]))
        assert info.value.cell == 0

    def test_with_nodes_checks_shape(self, box_mesh) -> None:
        with pytest.raises(InvalidArgumentError):
            box_mesh.with_nodes(box_mesh.nodes[:-1])


class TestCellGeometry:
    def test_first_cell(self, box_mesh) -> None:
        centroid, volume, depth = cell_geometry(box_mesh, 0)
        np.testing.assert_allclose(centroid, np.array(CELL) / 2)
        assert volume == pytest.approx(np.prod(CELL))
        assert depth == pytest.approx(CELL[2] / 2)

    def test_out_of_range(self, box_mesh) -> None:
        with pytest.raises(InvalidArgumentError):
            cell_geometry(box_mesh, box_mesh.n_cells)

    def test_face_areas(self) -> None:
        mesh = build_cartesian(1, 1, 1, 2.0, 3.0, 4.0)
        np.testing.assert_allclose(mesh.face_area[mesh.cell_faces[0]], [12, 12, 8, 8, 6, 6])
