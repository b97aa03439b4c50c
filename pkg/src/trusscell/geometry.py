"""Capsule (cylinder + hemispherical caps) primitives for geometry projection.

A bar is the set of points within w/2 of the segment [x0, xf]; a zero-length
bar degenerates to a sphere of diameter w. Distances and densities are
vectorized over evaluation points; derivative helpers return the pieces the
chain rule needs per point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]


@dataclass
class Bar:
    """One solid bar: medial-axis endpoints, diameter, per-material sizes."""

    x0: Array
    xf: Array
    width: float
    alpha: Array  # size variable per candidate material, each in [0, 1]

    def __post_init__(self) -> None:
        self.x0 = np.asarray(self.x0, dtype=float).reshape(3)
        self.xf = np.asarray(self.xf, dtype=float).reshape(3)
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if self.width <= 0.0:
            raise ValueError("bar width must be positive")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.xf - self.x0))

    def copy(self) -> "Bar":
        return replace(self, x0=self.x0.copy(), xf=self.xf.copy(), alpha=self.alpha.copy())


@dataclass(frozen=True)
class SampleWindow:
    """Spherical sampling window of radius r = factor * sqrt(3)/2 * h.

    factor = 1 inscribes the element cube's circumsphere; the window is what
    turns the signed distance into a volume-fraction density.
    """

    radius: float

    @staticmethod
    def for_spacing(h: float, factor: float = 1.0) -> "SampleWindow":
        if h <= 0.0 or factor <= 0.0:
            raise ValueError("window requires positive spacing and factor")
        return SampleWindow(radius=factor * np.sqrt(3.0) * h / 2.0)


def distance_to_segment(points: Array, x0: Array, xf: Array) -> Array:
    """Euclidean distance from each point to the segment [x0, xf]."""
    d, _, _ = _segment_distance_pieces(points, x0, xf)
    return d


def _segment_distance_pieces(points: Array, x0: Array, xf: Array) -> tuple[Array, Array, Array]:
    """Distance plus its endpoint derivatives for a batch of points.

    Returns (d, dd_dx0, dd_dxf) with shapes (M,), (M,3), (M,3). The interior
    branch uses the envelope form: with t the foot parameter and g the
    point-to-foot vector, dd/dx0 = -(1-t) g_hat and dd/dxf = -t g_hat, which
    also matches the endpoint branches at t=0 and t=1. Points on the axis
    (g = 0) get a zero derivative; the kink there has measure zero.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(3)
    xf = np.asarray(xf, dtype=float).reshape(3)
    a = xf - x0
    aa = float(a @ a)
    b = p - x0
    if aa == 0.0:
        # degenerate bar: a point, so the capsule is a sphere
        d = np.linalg.norm(b, axis=1)
        dd_dx0 = np.zeros_like(p)
        nz = d > 0.0
        dd_dx0[nz] = -b[nz] / d[nz, None]
        return d, dd_dx0, np.zeros_like(p)
    t = np.clip((b @ a) / aa, 0.0, 1.0)
    g = b - t[:, None] * a
    d = np.linalg.norm(g, axis=1)
    dd_dx0 = np.zeros_like(p)
    dd_dxf = np.zeros_like(p)
    nz = d > 0.0
    ghat = g[nz] / d[nz, None]
    dd_dx0[nz] = -(1.0 - t[nz, None]) * ghat
    dd_dxf[nz] = -t[nz, None] * ghat
    return d, dd_dx0, dd_dxf


def signed_distance(points: Array, bar: Bar) -> Array:
    """phi = d - w/2: negative inside the capsule, zero on its surface."""
    return distance_to_segment(points, bar.x0, bar.xf) - 0.5 * bar.width


def bar_density(phi: Array | float, r: float) -> Array | float:
    """Volume fraction of the radius-r window cut by the capsule surface.

    Equals the spherical-cap fraction of a window centered at signed distance
    phi from a locally flat surface: 1 inside the body of the bar (phi <= -r),
    0 beyond the window (phi >= r), cubic blend between. C1 everywhere.
    """
    phi = np.asarray(phi, dtype=float)
    x = np.clip(phi / r, -1.0, 1.0)
    mid = 0.5 + 0.25 * x**3 - 0.75 * x
    out = np.where(phi <= -r, 1.0, np.where(phi >= r, 0.0, mid))
    return float(out) if np.ndim(out) == 0 else out


def bar_density_grad(phi: Array | float, r: float) -> Array | float:
    """d bar_density / d phi; zero outside [-r, r] and at the band edges."""
    phi = np.asarray(phi, dtype=float)
    x = np.clip(phi / r, -1.0, 1.0)
    out = np.where(np.abs(phi) < r, (0.75 * x**2 - 0.75) / r, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def capsule_volume(length: float, width: float) -> float:
    """Exact solid volume: cylinder pi w^2 L / 4 plus cap sphere pi w^3 / 6."""
    return np.pi * width**2 * length / 4.0 + np.pi * width**3 / 6.0


def capsule_volume_grad(bar: Bar) -> tuple[Array, Array]:
    """d volume / d x0 and d xf at fixed width (caps do not depend on L)."""
    a = bar.xf - bar.x0
    length = float(np.linalg.norm(a))
    if length == 0.0:
        return np.zeros(3), np.zeros(3)
    dv_dl = np.pi * bar.width**2 / 4.0
    ahat = a / length
    return -dv_dl * ahat, dv_dl * ahat
