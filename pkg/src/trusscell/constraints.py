"""Design constraints: weight, discreteness, mutual exclusion, no-cut.

All inequality constraints are reported in raw form (caller subtracts the
current limit). Gradients come back either per size-variable array or per-bar
blocks matching the [x0, xf, alpha] layout used by the design vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .aggregation import lks_max, lks_weights
from .geometry import (
    Bar,
    SampleWindow,
    _segment_distance_pieces,
    bar_density,
    bar_density_grad,
    capsule_volume,
    capsule_volume_grad,
)
from .grid import UnitCellGrid
from .materials import MaterialSet
from .symmetry import SymmetryGroup, in_reference_region

Array = NDArray[np.float64]


def weight_fraction(rho_eff: Array, grid: UnitCellGrid, materials: MaterialSet) -> float:
    """Fraction of the heaviest-material cell weight actually used.

    w_f = sum_i gamma_i sum_e rho_eff^i(e) v_e / (|Omega| gamma_max), so a
    cell solidly filled with the heaviest candidate scores exactly 1.
    """
    per_material = rho_eff.sum(axis=0) * grid.element_volume  # (n_materials,)
    return float(per_material @ materials.gamma / (grid.cell_volume * materials.gamma_max))


def weight_fraction_field_weights(grid: UnitCellGrid, materials: MaterialSet) -> Array:
    """(n_el, n_materials) coefficients with w_f = sum_ei P[e,i] rho_eff[e,i]."""
    row = materials.gamma * grid.element_volume / (grid.cell_volume * materials.gamma_max)
    return np.broadcast_to(row, (grid.n_elements, materials.n_materials))


def discreteness(alpha_all: Array, k: float) -> float:
    """4 * LKS of alpha (1 - alpha) over every size variable.

    0 at fully binary designs (LKS of zeros is exactly zero), positive for
    intermediate alphas; scaled so a single alpha = 1/2 among zeros tops out
    near 1 as the aggregate sharpens.
    """
    a = np.asarray(alpha_all, dtype=float).ravel()
    return 4.0 * float(lks_max(a * (1.0 - a), k))


def discreteness_grad(alpha_all: Array, k: float) -> Array:
    a = np.asarray(alpha_all, dtype=float).ravel()
    return 4.0 * lks_weights(a * (1.0 - a), k) * (1.0 - 2.0 * a)


def mutual_exclusion(alphas: Array, k: float) -> float:
    """LKS over bars of sum_i alpha_i^q, minus one.

    <= 0 once no bar requests more than one full material's worth of size.
    """
    s = np.asarray(alphas, dtype=float).sum(axis=1)
    return float(lks_max(s, k)) - 1.0


def mutual_exclusion_grad(alphas: Array, k: float) -> Array:
    """(n_bars, n_materials): the bar's softmax weight, same for every i."""
    s = np.asarray(alphas, dtype=float).sum(axis=1)
    return np.repeat(lks_weights(s, k)[:, None], alphas.shape[1], axis=1)


@dataclass
class NoCutConstraint:
    """Keep every bar's solid volume inside the symmetry reference region.

    Compares the exact capsule volume V_geom against the numerically
    projected volume V_num = sum of single-bar densities over elements whose
    centroid lies in the reference region: a bar poking out of the region
    loses projected volume, so V_geom - V_num jumps positive. V_num carries
    an O(h) discretization bias even for uncut bars, so a per-bar offset
    calibrated once at the initial design is subtracted before aggregation.
    """

    grid: UnitCellGrid
    group: SymmetryGroup
    window: SampleWindow
    k: float
    region_elements: NDArray[np.intp] = field(init=False)
    region_points: Array = field(init=False)
    offsets: Array | None = None

    def __post_init__(self) -> None:
        inside = in_reference_region(self.grid.centroids, self.group)
        self.region_elements = np.flatnonzero(inside)
        self.region_points = self.grid.centroids[self.region_elements]

    def volumes(self, bars: list[Bar]) -> tuple[Array, Array]:
        """(V_geom, V_num) per bar; raw single-bar density, no material gate."""
        v_geom = np.array([capsule_volume(bar.length, bar.width) for bar in bars])
        v_num = np.empty(len(bars))
        r, ve = self.window.radius, self.grid.element_volume
        for q, bar in enumerate(bars):
            d, _, _ = _segment_distance_pieces(self.region_points, bar.x0, bar.xf)
            v_num[q] = np.sum(bar_density(d - 0.5 * bar.width, r)) * ve
        return v_geom, v_num

    def calibrate(self, bars: list[Bar]) -> Array:
        """Freeze per-bar offsets V_geom - V_num at the current (initial) design."""
        v_geom, v_num = self.volumes(bars)
        self.offsets = v_geom - v_num
        return self.offsets

    def deficits(self, bars: list[Bar]) -> Array:
        v_geom, v_num = self.volumes(bars)
        off = self.offsets if self.offsets is not None else 0.0
        return v_geom - v_num - off

    def value(self, bars: list[Bar]) -> float:
        """LKS over bars of the calibrated volume deficit."""
        return float(lks_max(self.deficits(bars), self.k))

    def value_and_grad(self, bars: list[Bar]) -> tuple[float, Array]:
        """Value plus (n_bars, 6) endpoint gradients; alphas do not enter."""
        deficits = self.deficits(bars)
        sigma = lks_weights(deficits, self.k)
        r, ve = self.window.radius, self.grid.element_volume
        grad = np.zeros((len(bars), 6))
        for q, bar in enumerate(bars):
            d, dd0, ddf = _segment_distance_pieces(self.region_points, bar.x0, bar.xf)
            drho = bar_density_grad(d - 0.5 * bar.width, r)
            dv_num = ve * np.concatenate([drho @ dd0, drho @ ddf])
            g0, gf = capsule_volume_grad(bar)
            grad[q] = sigma[q] * (np.concatenate([g0, gf]) - dv_num)
        return float(lks_max(deficits, self.k)), grad


@dataclass
class ContinuationState:
    """Tightening schedule for the discreteness and exclusion limits."""

    eps_d: float
    eps_m: float
    eps_d_final: float
    eps_m_final: float
    delta_eps: float
    delta_f_trigger: float

    def step(self, delta_f: float) -> bool:
        """Tighten both limits one notch when the objective has stalled."""
        if delta_f > self.delta_f_trigger:
            return False
        self.eps_d = max(self.eps_d - self.delta_eps, self.eps_d_final)
        self.eps_m = max(self.eps_m - self.delta_eps, self.eps_m_final)
        return True

    @property
    def finished(self) -> bool:
        return self.eps_d <= self.eps_d_final and self.eps_m <= self.eps_m_final
