"""Run configuration: flat key = value text files, strictly validated.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored. Lists are comma-separated; symmetry planes are semicolon-separated
normal triples. The only repeatable key is `bar` (explicit bar placement).
Unknown keys are hard errors, as are malformed values.

Lengths are in cell units (the same unit as cell_edge), moduli in whatever
stress unit the material data uses, specific weights in any consistent
weight-per-volume unit (only ratios enter).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .geometry import Bar, SampleWindow
from .grid import UnitCellGrid
from .materials import MaterialSet
from .projection import ProjectionSettings
from .symmetry import SymmetryGroup

Array = NDArray[np.float64]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    # problem
    problem: str = "max_bulk"
    wf_star: float = 0.1
    k_min_bulk: float = 0.001  # bulk floor, active for min_poisson only
    # discretization
    n: int = 16
    cell_edge: float = 1.0
    # materials
    E: Array = field(default_factory=lambda: np.array([]))
    nu_mat: Array = field(default_factory=lambda: np.array([]))
    gamma: Array = field(default_factory=lambda: np.array([]))
    E_min: float | None = None  # default 1e-4 * min(E)
    nu_min: float = 0.3
    # symmetry
    symmetry: str = "cubic"
    symmetry_planes: Array | None = None
    # initial design
    num_bars: int = 10
    bar_width: float = 0.1
    initial_bar_length: float | None = None  # default 1e-3 * cell_edge
    alpha_init: Array | None = None  # default 1/n_materials each
    explicit_bars: list[Array] = field(default_factory=list)
    seed: int = 0
    # projection and aggregation
    window_factor: float = 1.0
    aggregation_k: float = 25.0
    heaviside_exponent: float = 2.0
    # constraint limits and continuation
    eps_d_init: float = 1.0
    eps_d_final: float = 0.01
    eps_m_init: float = 0.3
    eps_m_final: float = 0.01
    eps_no_cut: float = 1e-5
    delta_eps: float = 0.1
    delta_f_trigger: float = 1e-3
    # optimizer
    move_limit: float = 0.1
    objtol: float = 1e-3
    max_iters: int = 500
    # linear solver
    linear_solver: str = "cg"
    cg_rtol: float = 1e-10
    # gradient audit
    fd_step: float = 1e-6
    fd_designs: int = 20
    fd_rel_tol: float = 1e-4
    fd_seed: int = 0
    # output
    out_dir: str = ""

    # ---- derived objects -------------------------------------------------
    @property
    def n_materials(self) -> int:
        return len(self.E)

    def materials(self) -> MaterialSet:
        e_min = self.E_min if self.E_min is not None else 1e-4 * float(np.min(self.E))
        return MaterialSet(E=self.E, nu=self.nu_mat, gamma=self.gamma, E_min=e_min, nu_min=self.nu_min)

    def grid(self) -> UnitCellGrid:
        return UnitCellGrid(n=self.n, edge=self.cell_edge)

    def group(self) -> SymmetryGroup:
        center = np.full(3, 0.5 * self.cell_edge)
        if self.symmetry == "cubic":
            return SymmetryGroup.cubic_group(center)
        if self.symmetry == "none":
            return SymmetryGroup.none(center)
        if self.symmetry == "planes":
            if self.symmetry_planes is None or len(self.symmetry_planes) == 0:
                raise ConfigError("symmetry = planes requires symmetry_planes")
            return SymmetryGroup.from_planes(center, self.symmetry_planes)
        raise ConfigError(f"unknown symmetry '{self.symmetry}'")

    def projection_settings(self) -> ProjectionSettings:
        window = SampleWindow.for_spacing(self.cell_edge / self.n, self.window_factor)
        return ProjectionSettings(window=window, k=self.aggregation_k, heaviside_exponent=self.heaviside_exponent)

    def bars_from_explicit(self) -> list[Bar]:
        bars = []
        for row in self.explicit_bars:
            if len(row) != 6 + self.n_materials:
                raise ConfigError(f"bar line needs 6 coordinates + {self.n_materials} alphas, got {len(row)} values")
            bars.append(Bar(x0=row[:3], xf=row[3:6], width=self.bar_width, alpha=row[6:]))
        return bars

    def validate(self) -> None:
        if self.problem not in ("max_bulk", "max_shear", "min_poisson"):
            raise ConfigError(f"unknown problem '{self.problem}'")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.cell_edge <= 0:
            raise ConfigError("cell_edge must be positive")
        if self.n_materials == 0:
            raise ConfigError("material lists E, nu_mat, gamma are required")
        if not (len(self.E) == len(self.nu_mat) == len(self.gamma)):
            raise ConfigError("E, nu_mat, gamma must have equal lengths")
        if not 0.0 < self.wf_star <= 1.0:
            raise ConfigError("wf_star must lie in (0, 1]")
        if self.bar_width <= 0 or self.bar_width >= self.cell_edge:
            raise ConfigError("bar_width must lie in (0, cell_edge)")
        if self.num_bars < 1 and not self.explicit_bars:
            raise ConfigError("num_bars must be at least 1")
        if self.alpha_init is not None and len(self.alpha_init) != self.n_materials:
            raise ConfigError("alpha_init length must match the material count")
        if self.initial_bar_length is not None and not 0.0 < self.initial_bar_length < self.cell_edge:
            raise ConfigError("initial_bar_length must lie in (0, cell_edge)")
        if self.move_limit <= 0 or self.move_limit > 1:
            raise ConfigError("move_limit must lie in (0, 1]")
        if self.linear_solver not in ("cg", "direct"):
            raise ConfigError(f"unknown linear_solver '{self.linear_solver}'")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        try:
            self.materials()
        except ValueError as err:
            raise ConfigError(str(err)) from err


_FLOAT_KEYS = {
    "wf_star", "k_min_bulk", "cell_edge", "E_min", "nu_min", "bar_width",
    "initial_bar_length", "window_factor", "aggregation_k", "heaviside_exponent",
    "eps_d_init", "eps_d_final", "eps_m_init", "eps_m_final", "eps_no_cut",
    "delta_eps", "delta_f_trigger", "move_limit", "objtol", "cg_rtol",
    "fd_step", "fd_rel_tol",
}
_INT_KEYS = {"n", "num_bars", "seed", "max_iters", "fd_designs", "fd_seed"}
_STR_KEYS = {"problem", "symmetry", "linear_solver", "out_dir"}
_LIST_KEYS = {"E", "nu_mat", "gamma", "alpha_init"}


def _parse_floats(text: str, key: str) -> Array:
    try:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    except ValueError as err:
        raise ConfigError(f"{key}: could not parse '{text}' as numbers") from err


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "bar":
            cfg.explicit_bars.append(_parse_floats(value, key))
            continue
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add(key)
        if key in _FLOAT_KEYS:
            setattr(cfg, key, float(_parse_floats(value, key)[0]) if value else None)
        elif key in _INT_KEYS:
            try:
                setattr(cfg, key, int(value))
            except ValueError as err:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from err
        elif key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key in _LIST_KEYS:
            setattr(cfg, key, _parse_floats(value, key))
        elif key == "symmetry_planes":
            rows = [_parse_floats(part, key) for part in value.split(";") if part.strip()]
            if any(len(r) != 3 for r in rows):
                raise ConfigError(f"line {lineno}: each symmetry plane needs exactly 3 normal components")
            cfg.symmetry_planes = np.vstack(rows)
        else:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def format_config(cfg: RunConfig, bars: list[Bar] | None = None, header: str | None = None) -> str:
    """Serialize a config (plus optional explicit bars) back to key = value text."""
    lines = [f"# {header}"] if header else []

    def fmt(v) -> str:
        if isinstance(v, float):
            return format(v, ".17g")
        return str(v)

    def fmt_list(arr) -> str:
        return ", ".join(format(float(x), ".17g") for x in np.atleast_1d(arr))

    lines += [
        f"problem = {cfg.problem}",
        f"wf_star = {fmt(cfg.wf_star)}",
        f"k_min_bulk = {fmt(cfg.k_min_bulk)}",
        f"n = {cfg.n}",
        f"cell_edge = {fmt(cfg.cell_edge)}",
        f"E = {fmt_list(cfg.E)}",
        f"nu_mat = {fmt_list(cfg.nu_mat)}",
        f"gamma = {fmt_list(cfg.gamma)}",
        f"nu_min = {fmt(cfg.nu_min)}",
        f"symmetry = {cfg.symmetry}",
        f"bar_width = {fmt(cfg.bar_width)}",
        f"window_factor = {fmt(cfg.window_factor)}",
        f"aggregation_k = {fmt(cfg.aggregation_k)}",
        f"heaviside_exponent = {fmt(cfg.heaviside_exponent)}",
    ]
    if cfg.E_min is not None:
        lines.append(f"E_min = {fmt(cfg.E_min)}")
    if cfg.symmetry_planes is not None:
        rows = "; ".join(" ".join(format(float(x), ".17g") for x in row) for row in cfg.symmetry_planes)
        lines.append(f"symmetry_planes = {rows}")
    for bar in bars or []:
        vals = list(bar.x0) + list(bar.xf) + list(bar.alpha)
        lines.append("bar = " + ", ".join(format(float(v), ".17g") for v in vals))
    return "\n".join(lines) + "\n"
