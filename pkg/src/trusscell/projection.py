"""Geometry projection: bars -> per-material voxel density fields.

For an evaluation point p (already reflected into the reference region) the
per-material effective density aggregates all bars q:

    rho_eff^i = sum_q H(-phi_q) rho_q w_i^q / (A + B)
    A = sum_q H(-phi_q) s_q,   B = 1 - KS_q(H(-phi_q) s_q),   s_q = sum_i alpha_i^q

where rho_q is the sampling-window density of bar q, H a smooth Heaviside
that gates bars by proximity, w_i^q the mutual-exclusion weights built from
the size variables, and the A/B denominator normalizes overlapping bars while
B keeps the ratio defined in void (single-argument KS is exact, so an empty
point divides by one). All routines are vectorized over points; gradients
come from a shared intermediate state so field values and chain-rule pieces
are computed once per design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .aggregation import ks_max, ks_weights, smooth_heaviside, smooth_heaviside_grad
from .geometry import Bar, SampleWindow, _segment_distance_pieces, bar_density, bar_density_grad
from .symmetry import SymmetryGroup, reflect_to_reference

Array = NDArray[np.float64]


@dataclass(frozen=True)
class ProjectionSettings:
    """Sampling window plus aggregation sharpness and Heaviside shape."""

    window: SampleWindow
    k: float = 25.0
    heaviside_exponent: float = 2.0
    eps: float | None = None  # Heaviside half-bandwidth; defaults to the window radius

    @property
    def band(self) -> float:
        return self.window.radius if self.eps is None else self.eps

    @property
    def reach(self) -> float:
        """Axis distance beyond which a bar cannot influence a point."""
        return max(self.window.radius, self.band)


def material_weights(alpha: Array) -> Array:
    """Mutual-exclusion weights w_i = alpha_i * prod_{j != i} (1 - alpha_j).

    alpha has shape (..., n_materials). One-hot alphas map to one-hot
    weights; overlapping large alphas suppress each other.
    """
    a = np.asarray(alpha, dtype=float)
    n = a.shape[-1]
    one_m = 1.0 - a
    w = np.empty_like(a)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        w[..., i] = a[..., i] * np.prod(one_m[..., others], axis=-1)
    return w


def material_weights_grad(alpha: Array) -> Array:
    """dw_i/dalpha_j with shape (..., i, j)."""
    a = np.asarray(alpha, dtype=float)
    n = a.shape[-1]
    one_m = 1.0 - a
    dw = np.zeros(a.shape + (n,))
    for i in range(n):
        others = [j for j in range(n) if j != i]
        dw[..., i, i] = np.prod(one_m[..., others], axis=-1)
        for j in others:
            rest = [l for l in range(n) if l != i and l != j]
            dw[..., i, j] = -a[..., i] * np.prod(one_m[..., rest], axis=-1)
    return dw


@dataclass
class ProjectionState:
    """All per-(bar, point) intermediates for one design evaluation."""

    bars: list[Bar]
    points: Array  # (M, 3), already in the reference region
    settings: ProjectionSettings
    phi: Array = field(init=False)  # (Q, M) signed distances
    H: Array = field(init=False)  # (Q, M) Heaviside gate values
    rho: Array = field(init=False)  # (Q, M) single-bar densities
    dphi_dx0: Array = field(init=False)  # (Q, M, 3)
    dphi_dxf: Array = field(init=False)
    dH_dphi: Array = field(init=False)  # (Q, M)
    drho_dphi: Array = field(init=False)
    s: Array = field(init=False)  # (Q,) alpha sums
    w: Array = field(init=False)  # (Q, I) exclusion weights
    dw: Array = field(init=False)  # (Q, I, I)
    t: Array = field(init=False)  # (Q, M) gated alpha sums
    sigma: Array = field(init=False)  # (Q, M) KS softmax over bars
    num: Array = field(init=False)  # (M, I)
    denom: Array = field(init=False)  # (M,)
    rho_eff: Array = field(init=False)  # (M, I)

    def __post_init__(self) -> None:
        bars, pts, st = self.bars, np.atleast_2d(np.asarray(self.points, dtype=float)), self.settings
        if not bars:
            raise ValueError("projection requires at least one bar")
        self.points = pts
        Q, M = len(bars), len(pts)
        r, eps, pe = st.window.radius, st.band, st.heaviside_exponent
        self.phi = np.empty((Q, M))
        self.dphi_dx0 = np.empty((Q, M, 3))
        self.dphi_dxf = np.empty((Q, M, 3))
        for q, bar in enumerate(bars):
            d, dd0, ddf = _segment_distance_pieces(pts, bar.x0, bar.xf)
            self.phi[q] = d - 0.5 * bar.width
            self.dphi_dx0[q] = dd0
            self.dphi_dxf[q] = ddf
        self.H = smooth_heaviside(-self.phi, eps, pe)
        self.dH_dphi = -smooth_heaviside_grad(-self.phi, eps, pe)
        self.rho = bar_density(self.phi, r)
        self.drho_dphi = bar_density_grad(self.phi, r)
        alphas = np.stack([bar.alpha for bar in bars])
        self.s = alphas.sum(axis=1)
        self.w = material_weights(alphas)
        self.dw = material_weights_grad(alphas)
        self.t = self.H * self.s[:, None]
        self.sigma = ks_weights(self.t, st.k, axis=0)
        self.num = np.einsum("qm,qi->mi", self.H * self.rho, self.w)
        A = self.t.sum(axis=0)
        B = 1.0 - np.asarray(ks_max(self.t, st.k, axis=0))
        self.denom = A + B
        self.rho_eff = self.num / self.denom[:, None]

    @property
    def n_materials(self) -> int:
        return self.w.shape[1]

    def bar_gradient(self, q: int, element_idx: Array | None = None) -> Array:
        """d rho_eff^i / d (bar q parameters) at each point.

        Returns shape (M_sel, n_materials, 6 + n_materials) ordered
        [x0, xf, alpha]. Cross-bar coupling enters through the shared
        denominator; only bar q's own chain-rule pieces appear.
        """
        sel = slice(None) if element_idx is None else element_idx
        H, rho = self.H[q][sel], self.rho[q][sel]
        dHp, drp = self.dH_dphi[q][sel], self.drho_dphi[q][sel]
        dphi = np.concatenate([self.dphi_dx0[q][sel], self.dphi_dxf[q][sel]], axis=1)  # (Ms, 6)
        num, D = self.num[sel], self.denom[sel]
        dDdt = 1.0 - self.sigma[q][sel]  # d(A + B)/d t_q
        I = self.n_materials
        Ms = len(H)
        out = np.empty((Ms, I, 6 + I))
        # endpoint coordinates: d num_i = (dH rho + H drho) w_i dphi,
        # d denom = (1 - sigma_q) s_q dH dphi
        coef_num = (dHp * rho + H * drp)[:, None] * self.w[q][None, :]  # (Ms, I)
        coef_den = dDdt * self.s[q] * dHp  # (Ms,)
        quot = (coef_num * D[:, None] - num * coef_den[:, None]) / (D**2)[:, None]
        out[:, :, :6] = quot[:, :, None] * dphi[:, None, :]
        # alpha_j: d num_i = H rho dw_ij, d denom = (1 - sigma_q) H
        dnum_a = (H * rho)[:, None, None] * self.dw[q][None, :, :]  # (Ms, I, I)
        dden_a = dDdt * H  # (Ms,)
        out[:, :, 6:] = (dnum_a * D[:, None, None] - num[:, :, None] * dden_a[:, None, None]) / (D**2)[:, None, None]
        return out


def effective_densities(
    bars: list[Bar], points: Array, settings: ProjectionSettings, n_materials: int | None = None
) -> Array:
    """Aggregated per-material densities at points already in the wedge.

    An empty bar list is an empty design: the field is identically zero,
    with n_materials columns (required in that case, inferred otherwise).
    """
    if not bars:
        if n_materials is None:
            raise ValueError("n_materials is required to project an empty design")
        return np.zeros((len(np.atleast_2d(points)), n_materials))
    return ProjectionState(bars, points, settings).rho_eff


def project_field(
    bars: list[Bar],
    points: Array,
    group: SymmetryGroup,
    settings: ProjectionSettings,
    n_materials: int | None = None,
) -> Array:
    """Density field at arbitrary points: reflect into the wedge, aggregate."""
    return effective_densities(bars, reflect_to_reference(points, group), settings, n_materials)


def bar_support(bar: Bar, points: Array, settings: ProjectionSettings, margin: float = 1e-9) -> NDArray[np.intp]:
    """Indices of points a bar can influence: d <= w/2 + reach + margin.

    Gradients (including the alpha ones active deep inside the bar) vanish
    identically outside this set.
    """
    d, _, _ = _segment_distance_pieces(points, bar.x0, bar.xf)
    return np.flatnonzero(d <= 0.5 * bar.width + settings.reach + margin)
