"""Tests for mhfeflow.export — property files, VTK fields, metrics CSV and Jacobian dumps."""

from __future__ import annotations

import json
import logging

import numpy as np
import pandas as pd
import pytest

from mhfeflow.errors import IngestionError, InvalidArgumentError
from mhfeflow.export import (
    METRICS_COLUMNS,
    dump_jacobian_mm,
    load_jacobian_mm,
    load_perm_ascii,
    metrics_frame,
    render_bench_report,
    write_fields_vtk,
    write_metrics_csv,
    write_perm_ascii,
)
from mhfeflow.grid import build_cartesian
from mhfeflow.models import BenchRow, RunMetrics, StepMetrics
from mhfeflow.physics import RockField, State


def write_values(path, values) -> None:
    path.write_text(" ".join(str(v) for v in values) + "\n", encoding="utf-8")


@pytest.fixture()
def small_field(rng) -> RockField:
    k = np.exp(np.log(1e-13) + rng.normal(size=6))
    return RockField(
        perm=np.column_stack([k, 2 * k, k / 10]), phi=rng.uniform(0.1, 0.3, 6), dims=(3, 2, 1)
    )


class TestPropertyFiles:
    def test_written_file_loads_back(self, tmp_path, small_field) -> None:
        path = write_perm_ascii(tmp_path / "k.txt", small_field)
        loaded = load_perm_ascii(path, 3, 2, 1)
        np.testing.assert_array_equal(loaded.perm, small_field.perm)
        np.testing.assert_array_equal(loaded.phi, small_field.phi)
        assert loaded.dims == (3, 2, 1)

    def test_block_layout(self, tmp_path) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1, 2, 3, 4, 5, 6, 0.1, 0.2])
        field = load_perm_ascii(path, 2, 1, 1)
        np.testing.assert_array_equal(field.perm, [[1, 3, 5], [2, 4, 6]])
        np.testing.assert_array_equal(field.phi, [0.1, 0.2])

    def test_porosity_floor(self, tmp_path, caplog) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1, 1, 1, 1, 1, 1, 0.0, 0.2])
        with caplog.at_level(logging.WARNING, logger="mhfeflow.export.fields"):
            field = load_perm_ascii(path, 2, 1, 1, porosity_floor=1e-3)
        np.testing.assert_array_equal(field.phi, [1e-3, 0.2])
        assert any("porosity_clamped" in r.message for r in caplog.records)

    def test_wrong_count(self, tmp_path) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1.0] * 7)
        with pytest.raises(IngestionError, match="expected 8 values") as info:
            load_perm_ascii(path, 2, 1, 1)
        assert info.value.position == 7

    def test_non_numeric_token(self, tmp_path) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1, 1, "x", 1, 1, 1, 0.2, 0.2])
        with pytest.raises(IngestionError, match="'x'") as info:
            load_perm_ascii(path, 2, 1, 1)
        assert info.value.position == 2

    def test_non_finite_value(self, tmp_path) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1, 1, 1, 1, 1, 1, "nan", 0.2])
        with pytest.raises(IngestionError, match="non-finite") as info:
            load_perm_ascii(path, 2, 1, 1)
        assert info.value.position == 6

    def test_non_positive_permeability(self, tmp_path) -> None:
        path = tmp_path / "k.txt"
        write_values(path, [1, 1, 1, -1, 1, 1, 0.2, 0.2])
        with pytest.raises(IngestionError, match="position 3") as info:
            load_perm_ascii(path, 2, 1, 1)
        assert info.value.position == 3

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(IngestionError, match="cannot read"):
            load_perm_ascii(tmp_path / "absent.txt", 2, 1, 1)


class TestVTK:
    def test_layout(self, tmp_path) -> None:
        mesh = build_cartesian(2, 1, 1, 1.0, 1.0, 1.0)
        state = State(
            p_elem=np.array([500.0, 499.5]),
            p_face=np.zeros(mesh.n_faces),
            p_bh=np.zeros(0),
            sw=np.array([0.25, 0.0]),
            time=1.5,
        )
        path = write_fields_vtk(mesh, state, tmp_path / "vtk" / "fields.vtk", title="case")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert lines[1] == "case t=1.5"
        assert lines[4] == f"POINTS {mesh.n_nodes} double"
        start = lines.index("CELLS 2 18")
        first = [int(v) for v in lines[start + 1].split()]
        c = mesh.cells[0]
        assert first == [8, c[0], c[1], c[3], c[2], c[4], c[5], c[7], c[6]]
        assert lines.count("12") == 2
        p = lines.index("SCALARS pressure double 1")
        assert lines[p + 2 : p + 4] == ["500", "499.5"]
        s = lines.index("SCALARS water_saturation double 1")
        assert lines[s + 2 : s + 4] == ["0.25", "0"]

    def test_size_mismatch(self, tmp_path) -> None:
        mesh = build_cartesian(2, 1, 1, 1.0, 1.0, 1.0)
        state = State(p_elem=np.zeros(3), p_face=np.zeros(1), p_bh=np.zeros(0), sw=np.zeros(3))
        with pytest.raises(InvalidArgumentError):
            write_fields_vtk(mesh, state, tmp_path / "f.vtk")


class TestMetricsCSV:
    def make(self) -> RunMetrics:
        return RunMetrics(
            steps=[
                StepMetrics(step=1, time=0.1, dt=0.1, newton_iterations=3, linear_iterations=20),
                StepMetrics(
                    step=2, time=0.3, dt=0.2, newton_iterations=2, linear_iterations=8, cuts=1
                ),
            ]
        )

    def test_frame(self) -> None:
        frame = metrics_frame(self.make())
        assert tuple(frame.columns) == METRICS_COLUMNS
        assert len(frame) == 3
        total = frame.iloc[-1]
        assert total["step"] == "total"
        assert total["N_N"] == 5
        assert total["N_l"] == 28
        assert total["cuts"] == 1

    def test_csv(self, tmp_path) -> None:
        path = write_metrics_csv(self.make(), tmp_path / "run" / "metrics.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == list(METRICS_COLUMNS)
        assert frame["step"].tolist() == ["1", "2", "total"]
        assert frame["time"].iloc[-1] == pytest.approx(0.3)

    def test_empty_run(self) -> None:
        frame = metrics_frame(RunMetrics())
        assert len(frame) == 1
        assert frame.iloc[0]["N_N"] == 0


class TestJacobianDump:
    def test_blocks_and_rhs_load_back(self, tmp_path, first_system) -> None:
        J, b, _ = first_system
        sidecar = dump_jacobian_mm(J, tmp_path / "dump" / "J0", rhs=b)
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        assert (meta["n_f"], meta["n_p"], meta["n_s"]) == J.sizes
        assert meta["blocks"]["pipi"] == "J0_pipi.mtx"
        assert meta["rhs"] == "J0_rhs.mtx"

        loaded, rhs = load_jacobian_mm(tmp_path / "dump" / "J0")
        for name, block in J.blocks().items():
            assert (loaded.blocks()[name] != block).nnz == 0, name
        np.testing.assert_array_equal(rhs, b)

    def test_without_rhs(self, tmp_path, first_system) -> None:
        J, _, _ = first_system
        dump_jacobian_mm(J, tmp_path / "J0")
        _, rhs = load_jacobian_mm(tmp_path / "J0")
        assert rhs is None

    def test_rhs_size_checked(self, tmp_path, first_system) -> None:
        J, b, _ = first_system
        with pytest.raises(InvalidArgumentError):
            dump_jacobian_mm(J, tmp_path / "J0", rhs=b[:-1])

    def test_missing_sidecar(self, tmp_path) -> None:
        with pytest.raises(IngestionError, match="sidecar"):
            load_jacobian_mm(tmp_path / "nothing")

    def test_shape_disagreement(self, tmp_path, first_system) -> None:
        J, _, _ = first_system
        sidecar = dump_jacobian_mm(J, tmp_path / "J0")
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        meta["n_f"] += 1
        sidecar.write_text(json.dumps(meta), encoding="utf-8")
        with pytest.raises(IngestionError, match="block pipi"):
            load_jacobian_mm(tmp_path / "J0")


class TestBenchReport:
    def test_table(self, tmp_path) -> None:
        rows = [
            BenchRow(pattern="Orig", r_s=1.0, iterations=40, converged=True, t_p=0.1, t_s=0.4),
            BenchRow(
                pattern="A",
                r_s=1.52,
                iterations=25,
                converged=False,
                t_p=0.2,
                t_s=0.3,
                mean_pattern_size=11.5,
            ),
        ]
        path = render_bench_report(
            rows,
            tmp_path / "bench.md",
            title="desk",
            n_cells=32,
            n_faces=128,
            n_wells=5,
            gravity=True,
            tol=1e-6,
        )
        text = path.read_text(encoding="utf-8")
        assert text.startswith("# Preconditioner benchmark: desk")
        assert "- gravity: on" in text
        assert "| Orig | 1.000 | 40 | yes |" in text
        assert "| A | 1.520 | 25 | no | 0.200 | 0.300 | 11.5 | 0 |" in text
