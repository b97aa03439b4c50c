"""Artifact files: VTK voxel densities, bar lists, history CSV, design reload."""

import csv

import numpy as np
import pytest

from trusscell.config import parse_config
from trusscell.driver import IterationRecord
from trusscell.export import (
    export_design,
    read_bar_file,
    read_vtk_density,
    surviving_bars,
    write_bar_file,
    write_history,
    write_vtk_density,
)
from trusscell.geometry import Bar
from trusscell.grid import UnitCellGrid
from trusscell.projection import ProjectionSettings, SampleWindow, project_field
from trusscell.symmetry import SymmetryGroup

CFG_TEXT = """
problem = max_bulk
n = 8
E = 10, 5
nu_mat = 0.3, 0.3
gamma = 0.9, 0.45
"""


def small_design():
    cfg = parse_config(CFG_TEXT)
    bars = [
        Bar(x0=np.array([0.58, 0.52, 0.51]), xf=np.array([0.83, 0.66, 0.57]), width=0.1,
            alpha=np.array([0.9, 0.05])),
        Bar(x0=np.array([0.63, 0.61, 0.53]), xf=np.array([0.88, 0.72, 0.64]), width=0.1,
            alpha=np.array([0.1, 0.8])),
    ]
    rho_eff = project_field(bars, cfg.grid().centroids, cfg.group(), cfg.projection_settings())
    return cfg, bars, rho_eff


class TestVtk:
    def test_round_trip_preserves_densities(self, tmp_path):
        cfg, bars, rho_eff = small_design()
        path = tmp_path / "density.vtk"
        write_vtk_density(path, cfg.grid(), rho_eff)
        back, n, spacing = read_vtk_density(path)
        assert n == cfg.n
        assert spacing == pytest.approx(cfg.cell_edge / cfg.n, rel=0.0)
        np.testing.assert_allclose(back, rho_eff, rtol=0.0, atol=1e-16)

    def test_weight_fraction_preserved(self, tmp_path):
        cfg, bars, rho_eff = small_design()
        path = tmp_path / "density.vtk"
        write_vtk_density(path, cfg.grid(), rho_eff)
        back, n, spacing = read_vtk_density(path)
        gamma = np.array([0.9, 0.45])
        wf = float((back * gamma).sum() / back.shape[0])
        wf_ref = float((rho_eff * gamma).sum() / rho_eff.shape[0])
        assert wf == pytest.approx(wf_ref, abs=1e-9)

    def test_legacy_header_layout(self, tmp_path):
        cfg, bars, rho_eff = small_design()
        path = tmp_path / "density.vtk"
        write_vtk_density(path, cfg.grid(), rho_eff)
        lines = path.read_text().splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET STRUCTURED_POINTS"
        assert lines[4] == "DIMENSIONS 9 9 9"
        assert lines[5] == "ORIGIN 0 0 0"
        assert lines[7] == "CELL_DATA 512"
        assert "SCALARS density_mat_1 double 1" in lines
        assert "SCALARS density_mat_2 double 1" in lines
        assert "SCALARS material_index int 1" in lines

    def test_material_index_field(self, tmp_path):
        grid = UnitCellGrid(n=2, edge=1.0)
        rho = np.zeros((8, 2))
        rho[0] = [0.9, 0.05]   # material 1 dominant
        rho[1] = [0.1, 0.8]    # material 2 dominant
        rho[2] = [0.2, 0.1]    # total below 0.5 -> void
        path = tmp_path / "d.vtk"
        write_vtk_density(path, grid, rho)
        text = path.read_text()
        tail = text[text.index("material_index") :].splitlines()[2:]
        index = [int(tok) for line in tail for tok in line.split()]
        assert index[:3] == [1, 2, 0]
        assert all(v == 0 for v in index[3:])

    def test_wrong_row_count_rejected(self, tmp_path):
        grid = UnitCellGrid(n=2, edge=1.0)
        with pytest.raises(ValueError, match="rows"):
            write_vtk_density(tmp_path / "d.vtk", grid, np.zeros((9, 1)))

    def test_non_density_file_rejected(self, tmp_path):
        path = tmp_path / "junk.vtk"
        path.write_text("# vtk DataFile Version 3.0\njunk\nASCII\n")
        with pytest.raises(ValueError):
            read_vtk_density(path)


class TestBarFile:
    def test_column_order_material_then_endpoints_then_width(self, tmp_path):
        bars = [Bar(x0=np.array([0.1, 0.2, 0.3]), xf=np.array([0.4, 0.5, 0.6]), width=0.07,
                    alpha=np.array([0.1, 0.9]))]
        path = tmp_path / "bars.txt"
        count = write_bar_file(path, bars, SymmetryGroup.none(np.full(3, 0.5)))
        assert count == 1
        rows = read_bar_file(path)
        assert len(rows) == 1
        mat, x0, xf, width = rows[0]
        assert mat == 2
        # the identity replica may differ by one rounding step from reflect/unreflect
        np.testing.assert_allclose(x0, [0.1, 0.2, 0.3], rtol=0.0, atol=1e-15)
        np.testing.assert_allclose(xf, [0.4, 0.5, 0.6], rtol=0.0, atol=1e-15)
        assert width == 0.07

    def test_cubic_replication_count_and_orbit(self, tmp_path):
        # a generic interior bar has a full 48-element orbit under the cubic group
        bars = [Bar(x0=np.array([0.58, 0.52, 0.51]), xf=np.array([0.83, 0.66, 0.57]), width=0.11,
                    alpha=np.array([0.9, 0.0]))]
        path = tmp_path / "bars.txt"
        count = write_bar_file(path, bars, SymmetryGroup.cubic_group(np.full(3, 0.5)))
        rows = read_bar_file(path)
        assert count == len(rows) == 48
        assert {mat for mat, *_ in rows} == {1}
        # every replica has the same length and width
        length = np.linalg.norm(np.array([0.83, 0.66, 0.57]) - np.array([0.58, 0.52, 0.51]))
        for _, x0, xf, width in rows:
            assert np.linalg.norm(xf - x0) == pytest.approx(length, rel=1e-12)
            assert width == 0.11

    def test_low_alpha_bars_dropped(self, tmp_path):
        bars = [
            Bar(x0=np.array([0.1, 0.2, 0.3]), xf=np.array([0.4, 0.5, 0.6]), width=0.07,
                alpha=np.array([0.9, 0.0])),
            Bar(x0=np.array([0.2, 0.3, 0.4]), xf=np.array([0.5, 0.6, 0.7]), width=0.07,
                alpha=np.array([0.2, 0.3])),
        ]
        assert len(surviving_bars(bars)) == 1
        path = tmp_path / "bars.txt"
        count = write_bar_file(path, bars, SymmetryGroup.none(np.full(3, 0.5)))
        assert count == 1

    def test_empty_design(self, tmp_path):
        path = tmp_path / "bars.txt"
        count = write_bar_file(path, [], SymmetryGroup.none(np.full(3, 0.5)))
        assert count == 0
        assert read_bar_file(path) == []

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bars.txt"
        path.write_text("1 0.1 0.2 0.3 0.4\n")
        with pytest.raises(ValueError, match="8 columns"):
            read_bar_file(path)


class TestHistory:
    def test_csv_parses_back(self, tmp_path):
        records = [
            IterationRecord(iteration=i, f=-0.1 * i, K=0.1 * i, G=0.05 * i, nu=0.3,
                            w_f=0.1, g_d=0.5, g_m=-0.1, g_n=0.0, eps_d=1.0, eps_m=0.3,
                            wall_time=1.5 * i)
            for i in range(3)
        ]
        path = tmp_path / "history.csv"
        write_history(path, records)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert [int(r["iteration"]) for r in rows] == [0, 1, 2]
        assert float(rows[2]["K"]) == pytest.approx(0.2, rel=0.0)
        assert set(rows[0]) == set(IterationRecord.HEADER.split(","))


class TestDesignFile:
    def test_export_design_reloadable(self, tmp_path):
        cfg, bars, rho_eff = small_design()
        paths = export_design(tmp_path / "out", cfg, bars, rho_eff)
        reloaded = parse_config(open(paths["design"]).read())
        rebuilt = reloaded.bars_from_explicit()
        assert len(rebuilt) == len(bars)
        for a, b in zip(rebuilt, bars):
            np.testing.assert_allclose(a.x0, b.x0, rtol=0.0)
            np.testing.assert_allclose(a.xf, b.xf, rtol=0.0)
            np.testing.assert_allclose(a.alpha, b.alpha, rtol=0.0)
        # re-projecting the reloaded design reproduces the exported voxel field
        rho2 = project_field(
            rebuilt, reloaded.grid().centroids, reloaded.group(), reloaded.projection_settings()
        )
        back, _, _ = read_vtk_density(paths["density"])
        np.testing.assert_allclose(rho2, back, atol=1e-12)

    def test_all_three_artifacts_written(self, tmp_path):
        cfg, bars, rho_eff = small_design()
        paths = export_design(tmp_path / "out", cfg, bars, rho_eff)
        for key in ("density", "bars", "design"):
            assert (tmp_path / "out").joinpath(paths[key].split("/")[-1]).is_file()
