"""Candidate material catalog and elasticity interpolation.

Stiffness matrices are 6x6 engineering Voigt (strain order 11, 22, 33, 23,
13, 12 with doubled shears), so quadratic forms a^T C b equal the tensor
contraction a_ij C_ijkl b_kl for symmetric a, b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]


def isotropic_stiffness(E: float, nu: float) -> Array:
    """Engineering-Voigt stiffness of an isotropic solid."""
    if E <= 0.0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson's ratio must lie in (-1, 0.5)")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.diag_indices(3)] = lam + 2.0 * mu
    C[3, 3] = C[4, 4] = C[5, 5] = mu
    return C


@dataclass
class MaterialSet:
    """Isotropic candidates (E_i, nu_i, gamma_i) plus a weak ersatz floor.

    gamma is specific weight; the ersatz tensor C_min fills the void so the
    cell problems stay positive definite.
    """

    E: Array
    nu: Array
    gamma: Array
    E_min: float
    nu_min: float = 0.3
    stiffness: Array = field(init=False)  # (n_materials, 6, 6)
    C_min: Array = field(init=False)

    def __post_init__(self) -> None:
        self.E = np.atleast_1d(np.asarray(self.E, dtype=float))
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if not (len(self.E) == len(self.nu) == len(self.gamma)) or len(self.E) == 0:
            raise ValueError("E, nu, gamma must be equal-length, non-empty lists")
        if np.any(self.gamma <= 0.0):
            raise ValueError("specific weights must be positive")
        if not 0.0 < self.E_min < np.min(self.E):
            raise ValueError("ersatz modulus must satisfy 0 < E_min < min(E)")
        self.stiffness = np.stack([isotropic_stiffness(e, n) for e, n in zip(self.E, self.nu)])
        self.C_min = isotropic_stiffness(self.E_min, self.nu_min)

    @property
    def n_materials(self) -> int:
        return len(self.E)

    @property
    def gamma_max(self) -> float:
        return float(np.max(self.gamma))


def interpolate_elasticity(rho_eff: Array, materials: MaterialSet) -> Array:
    """Per-point stiffness C_min + sum_i (C_i - C_min) rho_eff^i.

    rho_eff has shape (..., n_materials); the result appends a 6x6 matrix per
    point. SPD whenever sum_i rho_eff^i <= 1 and each rho_eff^i >= 0.
    """
    rho = np.asarray(rho_eff, dtype=float)
    if rho.shape[-1] != materials.n_materials:
        raise ValueError("density field has wrong material count")
    delta = materials.stiffness - materials.C_min[None, :, :]
    return materials.C_min + np.einsum("...i,iab->...ab", rho, delta)
