"""Tests for mhfeflow.bcpr.patterns and the PatternSpec model."""

from __future__ import annotations

import pytest

from mhfeflow.bcpr.patterns import pattern_for, static_pattern
from mhfeflow.errors import InvalidArgumentError
from mhfeflow.grid import build_cartesian
from mhfeflow.models import PatternSpec

CENTER = 62  # (2, 2, 2) in a 5×5×5 mesh


@pytest.fixture()
def cube_mesh():
    return build_cartesian(5, 5, 5, 1.0, 1.0, 1.0)


class TestStaticPattern:
    @pytest.mark.parametrize(
        "level,laterals,size",
        [(0, False, 6), (1, False, 12), (1, True, 36), (2, False, 18), (2, True, 66)],
    )
    def test_interior_sizes(self, cube_mesh, level, laterals, size) -> None:
        assert static_pattern(cube_mesh, CENTER, level, laterals).size == size

    def test_level_zero_is_own_faces(self, cube_mesh) -> None:
        faces = static_pattern(cube_mesh, CENTER, 0)
        assert sorted(cube_mesh.cell_faces[CENTER].tolist()) == faces.tolist()

    def test_walks_stop_at_boundary(self, cube_mesh) -> None:
        assert static_pattern(cube_mesh, 0, 2).size == 12
        assert static_pattern(cube_mesh, 0, 1, laterals=True).size == 6 + 3 + 3 * 4

    def test_nested(self, cube_mesh) -> None:
        small = set(static_pattern(cube_mesh, CENTER, 1).tolist())
        large = set(static_pattern(cube_mesh, CENTER, 3).tolist())
        assert small < large

    def test_far_faces_along_x(self, cube_mesh) -> None:
        faces = set(static_pattern(cube_mesh, CENTER, 2).tolist())
        right = cube_mesh.neighbor(CENTER, 1)
        assert int(cube_mesh.cell_faces[right, 1]) in faces
        assert int(cube_mesh.cell_faces[right, 2]) not in faces

    def test_sorted_and_unique(self, cube_mesh) -> None:
        faces = static_pattern(cube_mesh, CENTER, 2, laterals=True)
        assert faces.tolist() == sorted(set(faces.tolist()))

    def test_rejects_bad_level(self, cube_mesh) -> None:
        with pytest.raises(InvalidArgumentError):
            static_pattern(cube_mesh, CENTER, 5)

    def test_rejects_bad_cell(self, cube_mesh) -> None:
        with pytest.raises(InvalidArgumentError):
            static_pattern(cube_mesh, 125, 1)

    def test_dynamic_starts_from_own_faces(self, cube_mesh) -> None:
        start = pattern_for(cube_mesh, CENTER, PatternSpec.parse("dyn:6:2"))
        assert start.size == 6


class TestPatternSpec:
    @pytest.mark.parametrize(
        "text,level,laterals,label",
        [
            ("ORIG", 0, False, "Orig"),
            ("A", 1, False, "A"),
            ("b", 1, True, "B"),
            ("C", 2, False, "C"),
            ("D", 2, True, "D"),
            ("E", 3, False, "E"),
            (" F ", 4, False, "F"),
        ],
    )
    def test_letters(self, text, level, laterals, label) -> None:
        spec = PatternSpec.parse(text)
        assert spec.kind == "static"
        assert (spec.level, spec.laterals) == (level, laterals)
        assert spec.label == label

    def test_dynamic(self) -> None:
        spec = PatternSpec.parse("dyn:6:2")
        assert spec.kind == "dynamic"
        assert (spec.n_ent, spec.n_add) == (6, 2)
        assert spec.label == "dyn(6,2)"

    @pytest.mark.parametrize("text", ["jacobi", "EXACT"])
    def test_named_kinds(self, text) -> None:
        assert PatternSpec.parse(text).label == text.lower()

    def test_unlettered_static_label(self) -> None:
        assert PatternSpec(level=3, laterals=True).label == "L3+lat"

    @pytest.mark.parametrize("text", ["Z", "dyn:6", "dyn:2:3", ""])
    def test_rejects_unknown(self, text) -> None:
        with pytest.raises(ValueError):
            PatternSpec.parse(text)

    def test_is_frozen_value_object(self) -> None:
        spec = PatternSpec.parse("A")
        assert spec == PatternSpec(level=1)
        with pytest.raises(ValueError):
            spec.level = 2
