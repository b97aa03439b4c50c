"""Artifact export: density voxels (legacy VTK), bar lists, history CSV.

File shapes:
  - density field: legacy VTK STRUCTURED_POINTS, ASCII, one CELL_DATA scalar
    field per material (``density_mat_<i>``, x varying fastest) plus a
    combined ``material_index`` int field (0 = void, i = dominant material).
  - bar list: plain text, one line per surviving symmetry-replicated bar,
    columns ``material x0x x0y x0z xfx xfy xfz width``.
  - history: CSV with one row per iteration, header naming every field.
  - design file: a run-configuration file with one ``bar`` line per bar,
    directly reloadable by the config parser.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.typing import NDArray

from .config import RunConfig, format_config
from .driver import IterationRecord
from .geometry import Bar
from .grid import UnitCellGrid
from .symmetry import SymmetryGroup, replicate_bars

Array = NDArray[np.float64]

_BAR_HEADER = "# columns: material x0x x0y x0z xfx xfy xfz width"


def write_history(path: str, records: list[IterationRecord]) -> None:
    with open(path, "w") as fh:
        fh.write(IterationRecord.HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def write_vtk_density(path: str, grid: UnitCellGrid, rho_eff: Array) -> None:
    """Per-material voxel densities on the full cell as cell data."""
    rho = np.asarray(rho_eff, dtype=float)
    if rho.ndim == 1:
        rho = rho[:, None]
    if rho.shape[0] != grid.n_elements:
        raise ValueError(f"density field has {rho.shape[0]} rows, grid has {grid.n_elements} elements")
    n, n_mat = grid.n, rho.shape[1]
    total = rho.sum(axis=1)
    index = np.where(total < 0.5, 0, np.argmax(rho, axis=1) + 1)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("trusscell unit-cell densities\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n + 1} {n + 1} {n + 1}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {grid.h:.17g} {grid.h:.17g} {grid.h:.17g}\n")
        fh.write(f"CELL_DATA {grid.n_elements}\n")
        for i in range(n_mat):
            fh.write(f"SCALARS density_mat_{i + 1} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            _write_values(fh, rho[:, i], "%.17g")
        fh.write("SCALARS material_index int 1\n")
        fh.write("LOOKUP_TABLE default\n")
        _write_values(fh, index, "%d")


def _write_values(fh, values, fmt: str, per_line: int = 6) -> None:
    for start in range(0, len(values), per_line):
        fh.write(" ".join(fmt % v for v in values[start : start + per_line]) + "\n")


def read_vtk_density(path: str) -> tuple[Array, int, float]:
    """Inverse of write_vtk_density: (rho_eff (n^3, n_mat), n, spacing)."""
    with open(path) as fh:
        n = None
        spacing = None
        n_cells = None
        fields: dict[str, list[float]] = {}
        current: list[float] | None = None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].upper()
            if key == "DIMENSIONS":
                n = int(parts[1]) - 1
            elif key == "SPACING":
                spacing = float(parts[1])
            elif key == "CELL_DATA":
                n_cells = int(parts[1])
            elif key == "SCALARS":
                current = []
                fields[parts[1]] = current
            elif key == "LOOKUP_TABLE" or parts[0].startswith("#") or key in ("ASCII", "DATASET", "ORIGIN"):
                continue
            elif current is not None:
                current.extend(float(tok) for tok in parts)
            # anything else (title line) is ignored
        if n is None or n_cells is None or spacing is None:
            raise ValueError(f"{path} is not a structured-points density file")
        names = sorted((k for k in fields if k.startswith("density_mat_")), key=lambda s: int(s.rsplit("_", 1)[1]))
        if not names:
            raise ValueError(f"{path} has no density_mat_* fields")
        rho = np.column_stack([np.asarray(fields[name]) for name in names])
        if rho.shape[0] != n_cells:
            raise ValueError(f"{path}: expected {n_cells} cells, found {rho.shape[0]}")
        return rho, n, spacing


def surviving_bars(bars: list[Bar], threshold: float = 0.5) -> list[Bar]:
    """Bars whose largest size variable clears the keep threshold."""
    return [bar for bar in bars if float(np.max(bar.alpha)) >= threshold]


def write_bar_file(path: str, bars: list[Bar], group: SymmetryGroup) -> int:
    """Symmetry-replicated surviving bars; returns the line count."""
    kept = surviving_bars(bars)
    replicated: list[Bar] = replicate_bars(kept, group) if kept else []
    with open(path, "w") as fh:
        fh.write(_BAR_HEADER + "\n")
        for bar in replicated:
            mat = int(np.argmax(bar.alpha)) + 1
            coords = " ".join(
                "%.17g" % v for v in (*bar.x0, *bar.xf)
            )
            fh.write(f"{mat} {coords} {bar.width:.17g}\n")
    return len(replicated)


def read_bar_file(path: str) -> list[tuple[int, Array, Array, float]]:
    """(material, x0, xf, width) tuples from a bar-list file."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"bar line needs 8 columns, got {len(parts)}: {line!r}")
            out.append(
                (int(parts[0]), np.array([float(p) for p in parts[1:4]]),
                 np.array([float(p) for p in parts[4:7]]), float(parts[7]))
            )
    return out


def write_design_file(path: str, cfg: RunConfig, bars: list[Bar]) -> None:
    with open(path, "w") as fh:
        fh.write(format_config(cfg, bars=bars, header="optimized design; reloadable run configuration"))


def export_design(out_dir: str, cfg: RunConfig, bars: list[Bar], rho_eff: Array) -> dict[str, str]:
    """Write the voxel field and bar list for an evaluated design."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "density": os.path.join(out_dir, "density.vtk"),
        "bars": os.path.join(out_dir, "bars.txt"),
        "design": os.path.join(out_dir, "design.txt"),
    }
    write_vtk_density(paths["density"], cfg.grid(), rho_eff)
    write_bar_file(paths["bars"], bars, cfg.group())
    write_design_file(paths["design"], cfg, bars)
    return paths
