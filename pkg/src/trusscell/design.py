"""Design vector packing and initial designs.

The optimizer sees one flat vector z in [0, 1]^(n_bars * (6 + n_materials)):
per bar the two endpoints scaled by the cell edge, then the material size
variables. Bar widths are fixed data, not design variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import Bar
from .symmetry import SymmetryGroup, in_reference_region

Array = NDArray[np.float64]


@dataclass(frozen=True)
class DesignVector:
    """Layout and affine scaling between bars and the optimizer's z."""

    n_bars: int
    n_materials: int
    edge: float

    @property
    def block(self) -> int:
        return 6 + self.n_materials

    @property
    def size(self) -> int:
        return self.n_bars * self.block

    def coordinate_mask(self) -> NDArray[np.bool_]:
        """True at endpoint entries (the ones scaled by the cell edge)."""
        mask = np.zeros(self.size, dtype=bool)
        for q in range(self.n_bars):
            mask[q * self.block : q * self.block + 6] = True
        return mask

    def scale(self, bars: list[Bar]) -> Array:
        if len(bars) != self.n_bars:
            raise ValueError("bar count does not match design vector layout")
        z = np.empty(self.size)
        for q, bar in enumerate(bars):
            o = q * self.block
            z[o : o + 3] = bar.x0 / self.edge
            z[o + 3 : o + 6] = bar.xf / self.edge
            z[o + 6 : o + self.block] = bar.alpha
        return z

    def unscale(self, z: Array, widths: Array) -> list[Bar]:
        bars = []
        for q in range(self.n_bars):
            o = q * self.block
            bars.append(
                Bar(
                    x0=z[o : o + 3] * self.edge,
                    xf=z[o + 3 : o + 6] * self.edge,
                    width=float(widths[q]),
                    alpha=z[o + 6 : o + self.block].copy(),
                )
            )
        return bars

    def physical_to_scaled_grad(self, grad: Array) -> Array:
        """Chain rule for the affine map: coordinate entries pick up edge."""
        out = np.asarray(grad, dtype=float).copy()
        out[self.coordinate_mask()] *= self.edge
        return out


def initial_design(
    n_bars: int,
    width: float,
    group: SymmetryGroup,
    edge: float,
    rng: np.random.Generator,
    alpha_init: Array,
    length: float,
    margin: float | None = None,
) -> list[Bar]:
    """Seeded bars of target length strictly inside the reference region.

    Bars default to near-spheres (length 1e-3 edge at the call site) with
    every candidate material at its initial size; longer targets seed a
    connected starting lattice by joining two random points of the region
    whose separation is within [0.5, 1.5] of the target. Placement keeps a
    margin (default w/2) from all symmetry planes and cell faces so the
    initial no-cut calibration sees whole bars.
    """
    if margin is None:
        margin = 0.5 * width
    if length <= 0.0:
        raise ValueError("initial bar length must be positive")

    def _ok(p: Array) -> bool:
        if np.any(p < margin) or np.any(p > edge - margin):
            return False
        return bool(in_reference_region(p, group, tol=-margin)[0])

    def _sample_point() -> Array:
        center = rng.uniform(0.0, edge, size=3)
        if group.cubic:
            # sample the wedge directly: offsets from the cell center, sorted
            u = np.sort(rng.uniform(0.0, 0.5 * edge, size=3))[::-1]
            center = group.center + u
        return center

    long_target = length > 0.02 * edge
    bars = []
    attempts = 0
    while len(bars) < n_bars:
        attempts += 1
        if attempts > 100_000:
            raise RuntimeError("could not place bars inside the reference region; margin too large for this cell")
        if long_target:
            x0, xf = _sample_point(), _sample_point()
            if not (_ok(x0) and _ok(xf)):
                continue
            if not 0.5 * length <= float(np.linalg.norm(xf - x0)) <= 1.5 * length:
                continue
        else:
            center = _sample_point()
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            x0 = center - 0.5 * length * direction
            xf = center + 0.5 * length * direction
            if not (_ok(x0) and _ok(xf)):
                continue
        bars.append(Bar(x0=x0, xf=xf, width=width, alpha=np.array(alpha_init, dtype=float)))
    return bars


def validate_bars_in_region(bars: list[Bar], group: SymmetryGroup, edge: float, tol: float = 1e-9) -> None:
    """Raise if any configured bar endpoint leaves the reference region."""
    for q, bar in enumerate(bars):
        for name, p in (("x0", bar.x0), ("xf", bar.xf)):
            inside_cell = np.all(p >= -tol) and np.all(p <= edge + tol)
            if not inside_cell or not in_reference_region(p, group, tol=tol)[0]:
                raise ValueError(f"bar {q} endpoint {name} lies outside the symmetry reference region")
