"""Periodic numerical homogenization on the voxel grid.

Six cell problems (one per unit macroscopic strain in engineering Voigt
order 11, 22, 33, 23, 13, 12) are solved for the periodic fluctuation
displacements; the effective stiffness is the mutual energy

    C^H_ab = (1/|Y|) sum_e sum_g w_g (e0_a - e*_a)^T C_e (e0_b - e*_b)

with the same 2x2x2 Gauss rule as the stiffness so the form is stationary in
the fluctuations and the self-adjoint sensitivity below is exact for the
discrete values. The material tensor is constant per element (centroid
density sample); unit strains are the Voigt basis vectors, so a homogeneous
medium returns its own C exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import cg, splu

from .grid import UnitCellGrid

Array = NDArray[np.float64]


class SolverFailure(RuntimeError):
    """CG did not reach the requested residual; carries per-case residuals."""

    def __init__(self, message: str, residuals: Array):
        super().__init__(f"{message}; relative residuals {np.array2string(residuals, precision=3)}")
        self.residuals = residuals


def _shape_gradients(xi: float, eta: float, zeta: float, h: float) -> Array:
    """(8, 3) physical gradients of the trilinear shape functions.

    Natural coordinates run over [0, 1]^3; local node l = a + 2b + 4c sits at
    (a, b, c).
    """
    grads = np.empty((8, 3))
    for c in (0, 1):
        for b in (0, 1):
            for a in (0, 1):
                fa, fb, fc = (xi if a else 1 - xi), (eta if b else 1 - eta), (zeta if c else 1 - zeta)
                da, db, dc = (1.0 if a else -1.0), (1.0 if b else -1.0), (1.0 if c else -1.0)
                grads[a + 2 * b + 4 * c] = [da * fb * fc / h, fa * db * fc / h, fa * fb * dc / h]
    return grads


def _b_matrix(grads: Array) -> Array:
    """6x24 engineering-strain matrix for node-major (ux, uy, uz) DOFs."""
    B = np.zeros((6, 24))
    for l in range(8):
        dx, dy, dz = grads[l]
        cols = slice(3 * l, 3 * l + 3)
        B[0, cols] = [dx, 0, 0]
        B[1, cols] = [0, dy, 0]
        B[2, cols] = [0, 0, dz]
        B[3, cols] = [0, dz, dy]
        B[4, cols] = [dz, 0, dx]
        B[5, cols] = [dy, dx, 0]
    return B


@dataclass
class ElementKernel:
    """Geometry-only element quantities for the uniform cube of side h.

    The element stiffness is linear in the constant material tensor:
    ke(C) = sum_ab C_ab * basis_ab with basis_ab = sum_g w_g B_g[a]^T B_g[b],
    so per-element stiffnesses reduce to one einsum over the field.
    """

    h: float
    B: Array = field(init=False)  # (8, 6, 24) per Gauss point
    weights: Array = field(init=False)  # (8,) physical quadrature weights
    Bsum: Array = field(init=False)  # (6, 24) volume-integrated B
    basis: Array = field(init=False)  # (6, 6, 24, 24)
    volume: float = field(init=False)

    def __post_init__(self) -> None:
        gp = 0.5 + np.array([-1.0, 1.0]) / (2.0 * np.sqrt(3.0))
        pts = [(x, y, z) for z in gp for y in gp for x in gp]
        self.volume = self.h**3
        self.weights = np.full(8, self.volume / 8.0)
        self.B = np.stack([_b_matrix(_shape_gradients(x, y, z, self.h)) for x, y, z in pts])
        self.Bsum = np.einsum("g,gci->ci", self.weights, self.B)
        self.basis = np.einsum("g,gai,gbj->abij", self.weights, self.B, self.B)

    def stiffnesses(self, C_field: Array) -> Array:
        """(n_el, 24, 24) element matrices for per-element constant C."""
        return np.einsum("eab,abij->eij", C_field, self.basis, optimize=True)

    def unit_loads(self, C_field: Array) -> Array:
        """(n_el, 24, 6) element loads Bsum^T C e0_a for the six unit strains."""
        return np.einsum("ci,eca->eia", self.Bsum, C_field, optimize=True)


@dataclass
class PeriodicOperator:
    """Grid + kernel with precomputed scatter indices and pinned-DOF mask."""

    grid: UnitCellGrid
    kernel: ElementKernel = field(init=False)
    rows: NDArray[np.intp] = field(init=False)
    cols: NDArray[np.intp] = field(init=False)
    pinned_entry_mask: NDArray[np.bool_] = field(init=False)

    def __post_init__(self) -> None:
        self.kernel = ElementKernel(self.grid.h)
        edof = self.grid.edof
        self.rows = np.repeat(edof, 24, axis=1).ravel()
        self.cols = np.tile(edof, (1, 24)).ravel()
        pinned = self.grid.pinned_dofs
        self.pinned_entry_mask = np.isin(self.rows, pinned) | np.isin(self.cols, pinned)

    def assemble(self, C_field: Array) -> sp.csr_matrix:
        """Global stiffness with pinned rows/cols zeroed and a unit diagonal."""
        data = self.kernel.stiffnesses(C_field).ravel()
        data = np.where(self.pinned_entry_mask, 0.0, data)
        K = sp.coo_matrix((data, (self.rows, self.cols)), shape=(self.grid.n_dofs, self.grid.n_dofs)).tocsr()
        K += sp.diags(np.isin(np.arange(self.grid.n_dofs), self.grid.pinned_dofs).astype(float))
        return K

    def load_vectors(self, C_field: Array) -> Array:
        """(6, n_dofs) assembled unit-strain loads, zeroed at pinned DOFs."""
        fe = self.kernel.unit_loads(C_field)  # (n_el, 24, 6)
        f = np.zeros((6, self.grid.n_dofs))
        for a in range(6):
            np.add.at(f[a], self.grid.edof.ravel(), fe[:, :, a].ravel())
        f[:, self.grid.pinned_dofs] = 0.0
        return f


@dataclass
class CellProblemSolution:
    """Fluctuation displacements for the six unit-strain cases."""

    u: Array  # (6, n_dofs)
    residuals: Array  # (6,) relative residual norms
    iterations: NDArray[np.intp]


def assemble_and_solve(
    op: PeriodicOperator,
    C_field: Array,
    rtol: float = 1e-10,
    maxiter: int | None = None,
    warm_start: Array | None = None,
    method: str = "cg",
) -> CellProblemSolution:
    """Solve the six periodic cell problems.

    Default solver is Jacobi-preconditioned CG with relative tolerance rtol
    and maxiter = 10 n^3; `method="direct"` takes a sparse LU (useful for
    small audit grids). Raises SolverFailure if any case misses rtol.
    """
    grid = op.grid
    if maxiter is None:
        maxiter = 10 * grid.n**3
    K = op.assemble(C_field)
    F = op.load_vectors(C_field)
    u = np.zeros((6, grid.n_dofs))
    residuals = np.zeros(6)
    iterations = np.zeros(6, dtype=np.intp)
    if method == "direct":
        lu = splu(K.tocsc())
        for a in range(6):
            u[a] = lu.solve(F[a])
            nf = np.linalg.norm(F[a])
            residuals[a] = np.linalg.norm(F[a] - K @ u[a]) / nf if nf > 0 else 0.0
        if np.any(residuals > 10 * rtol):
            raise SolverFailure("direct solve residual above tolerance", residuals)
        return CellProblemSolution(u=u, residuals=residuals, iterations=iterations)
    if method != "cg":
        raise ValueError(f"unknown linear solver '{method}'")
    M = sp.diags(1.0 / K.diagonal())
    for a in range(6):
        nf = np.linalg.norm(F[a])
        if nf == 0.0:
            continue
        x0 = warm_start[a] if warm_start is not None else None
        count = [0]

        def _tick(_):
            count[0] += 1

        x, info = cg(K, F[a], x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=_tick)
        if info != 0 and warm_start is not None:
            # a stale warm start can stall CG; retry cold before giving up
            x, info = cg(K, F[a], rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=_tick)
        u[a] = x
        iterations[a] = count[0]
        residuals[a] = np.linalg.norm(F[a] - K @ x) / nf
        if info != 0:
            raise SolverFailure(f"CG failed to converge for case {a}", residuals)
    return CellProblemSolution(u=u, residuals=residuals, iterations=iterations)


def case_strains(op: PeriodicOperator, sol: CellProblemSolution) -> Array:
    """(n_el, 8, 6, 6) total strain per element, Gauss point and case.

    F[e, g, :, a] = e0_a - B_g u_a(e); columns are the six load cases.
    """
    U = sol.u[:, op.grid.edof]  # (6, n_el, 24)
    S = np.einsum("gci,aei->egca", op.kernel.B, U, optimize=True)
    return np.eye(6)[None, None, :, :] - S


def effective_tensor(op: PeriodicOperator, C_field: Array, sol: CellProblemSolution) -> tuple[Array, Array]:
    """Homogenized stiffness and the case strains used to build it.

    Returns (C_H, F); C_H is symmetrized to kill quadrature roundoff skew.
    """
    F = case_strains(op, sol)
    CH = np.einsum("g,egca,ecd,egdb->ab", op.kernel.weights, F, C_field, F, optimize=True)
    CH /= op.grid.cell_volume
    return 0.5 * (CH + CH.T), F


def tensor_sensitivities(op: PeriodicOperator, F: Array, dC_field: Array) -> Array:
    """d C^H for a per-element material perturbation dC_field (n_el, 6, 6).

    Self-adjoint form: the solved fluctuations are stationary points of the
    mutual energy, so only the explicit dC term survives.
    """
    dCH = np.einsum("g,egca,ecd,egdb->ab", op.kernel.weights, F, dC_field, F, optimize=True)
    dCH /= op.grid.cell_volume
    return 0.5 * (dCH + dCH.T)


def energy_weights(op: PeriodicOperator, F: Array, delta_C: Array) -> Array:
    """Q[e, i, a, b] = sum_g w_g F_g^T (C_i - C_min) F_g / |Y|.

    Contracting Q with d rho_eff^i(e)/dz gives d C^H_ab/dz; every objective
    and the weight constraint reduce to weighted sums of these.
    """
    Q = np.einsum("g,egca,icd,egdb->eiab", op.kernel.weights, F, delta_C, F, optimize=True)
    return Q / op.grid.cell_volume


def bulk_modulus(CH: Array) -> float:
    """K = (1/9) * sum of the upper-left 3x3 block."""
    return float(np.sum(CH[:3, :3]) / 9.0)


def shear_modulus(CH: Array) -> float:
    """G = mean of the three Voigt shear diagonal entries."""
    return float((CH[3, 3] + CH[4, 4] + CH[5, 5]) / 3.0)


def poisson_ratio(CH: Array) -> float:
    """nu = C_1122 / (2 (C_1122 + C_1212)); undefined when the sum vanishes."""
    den = CH[0, 1] + CH[5, 5]
    if den == 0.0:
        raise ZeroDivisionError("Poisson ratio undefined: C_1122 + C_1212 = 0")
    return float(CH[0, 1] / (2.0 * den))
