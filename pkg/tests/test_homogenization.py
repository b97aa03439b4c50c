"""Periodic homogenization: analytic oracles, solver contract, and bounds."""

import numpy as np
import pytest

from trusscell.grid import build_grid
from trusscell.homogenization import (
    PeriodicOperator,
    SolverFailure,
    assemble_and_solve,
    bulk_modulus,
    effective_tensor,
    poisson_ratio,
    shear_modulus,
)
from trusscell.materials import isotropic_stiffness


def laminate_oracle(C_list, fractions):
    """Exact effective tensor of a laminate layered along x.

    Partition Voigt indices into those carrying an x index (normal set
    n = [xx, xz, xy] -> 0, 4, 5), whose stresses are continuous across
    interfaces, and the rest (p = [yy, zz, yz] -> 1, 2, 3), whose strains are
    common to all layers. Solving the interface conditions layer by layer and
    volume-averaging gives the closed form below, exact for any phase count.
    """
    n, p = [0, 4, 5], [1, 2, 3]
    f = np.asarray(fractions, dtype=float)
    Ainv_avg = np.zeros((3, 3))
    AinvB_avg = np.zeros((3, 3))
    D_avg = np.zeros((3, 3))
    BtAinvB_avg = np.zeros((3, 3))
    for C, w in zip(C_list, f):
        A = C[np.ix_(n, n)]
        B = C[np.ix_(n, p)]
        D = C[np.ix_(p, p)]
        Ainv = np.linalg.inv(A)
        Ainv_avg += w * Ainv
        AinvB_avg += w * (Ainv @ B)
        D_avg += w * D
        BtAinvB_avg += w * (B.T @ Ainv @ B)
    Cnn = np.linalg.inv(Ainv_avg)
    Cnp = Cnn @ AinvB_avg
    Cpp = D_avg - BtAinvB_avg + AinvB_avg.T @ Cnn @ AinvB_avg
    CH = np.zeros((6, 6))
    CH[np.ix_(n, n)] = Cnn
    CH[np.ix_(n, p)] = Cnp
    CH[np.ix_(p, n)] = Cnp.T
    CH[np.ix_(p, p)] = Cpp
    return CH


def solve_field(n, C_field, method="cg"):
    op = PeriodicOperator(build_grid(n))
    sol = assemble_and_solve(op, C_field, method=method)
    CH, _ = effective_tensor(op, C_field, sol)
    return op, sol, CH


def x_layered_field(n, C_a, C_b):
    """50/50 laminate with interfaces aligned to element faces."""
    grid = build_grid(n)
    C_field = np.empty((grid.n_elements, 6, 6))
    left = grid.centroids[:, 0] < 0.5 * grid.edge
    C_field[left] = C_a
    C_field[~left] = C_b
    return C_field


class TestUniformField:
    def test_zero_fluctuation_and_exact_tensor(self):
        C = isotropic_stiffness(10.0, 0.3)
        n = 4
        C_field = np.broadcast_to(C, (n**3, 6, 6)).copy()
        _, sol, CH = solve_field(n, C_field)
        # a homogeneous medium admits the uniform strain exactly
        assert np.max(np.abs(sol.u)) < 1e-12
        np.testing.assert_allclose(CH, C, atol=1e-12)

    def test_isotropic_moduli(self):
        C = isotropic_stiffness(10.0, 0.3)
        n = 4
        _, _, CH = solve_field(n, np.broadcast_to(C, (n**3, 6, 6)).copy())
        assert bulk_modulus(CH) == pytest.approx(10.0 / (3 * (1 - 2 * 0.3)), rel=1e-6)
        assert shear_modulus(CH) == pytest.approx(10.0 / (2 * (1 + 0.3)), rel=1e-6)
        assert poisson_ratio(CH) == pytest.approx(0.3, rel=1e-6)

    def test_ersatz_field_passes_through(self):
        C = isotropic_stiffness(1e-3, 0.3)
        n = 3
        _, _, CH = solve_field(n, np.broadcast_to(C, (n**3, 6, 6)).copy())
        np.testing.assert_allclose(CH, C, atol=1e-15)


class TestLaminate:
    def test_matches_first_principles_oracle(self):
        C1 = isotropic_stiffness(10.0, 0.3)
        C2 = isotropic_stiffness(5.0, 0.3)
        _, sol, CH = solve_field(4, x_layered_field(4, C1, C2))
        oracle = laminate_oracle([C1, C2], [0.5, 0.5])
        # element-aligned interfaces make the trilinear solution exact, so
        # agreement is limited only by the linear-solver tolerance
        np.testing.assert_allclose(CH, oracle, rtol=1e-8, atol=1e-10)

    def test_fluctuation_constant_in_transverse_directions(self):
        C1 = isotropic_stiffness(10.0, 0.3)
        C2 = isotropic_stiffness(5.0, 0.3)
        n = 4
        _, sol, _ = solve_field(n, x_layered_field(n, C1, C2))
        u = sol.u.reshape(6, n**3, 3)
        # unique node id = i + n*(j + n*k): group by x-slab index i
        ids = np.arange(n**3)
        for i in range(n):
            slab = u[:, ids % n == i, :]
            spread = np.max(np.abs(slab - slab[:, :1, :]))
            assert spread < 1e-8

    def test_harmonic_and_arithmetic_limits(self):
        C1 = isotropic_stiffness(10.0, 0.3)
        C2 = isotropic_stiffness(5.0, 0.3)
        oracle = laminate_oracle([C1, C2], [0.5, 0.5])
        lam1, mu1 = C1[0, 1], C1[3, 3]
        lam2, mu2 = C2[0, 1], C2[3, 3]
        # axial stiffness is the harmonic mean of the P-wave moduli
        p1, p2 = lam1 + 2 * mu1, lam2 + 2 * mu2
        assert oracle[0, 0] == pytest.approx(2.0 / (1 / p1 + 1 / p2), rel=1e-12)
        # shears: harmonic mean when the x direction is involved, arithmetic otherwise
        assert oracle[4, 4] == pytest.approx(2.0 / (1 / mu1 + 1 / mu2), rel=1e-12)
        assert oracle[5, 5] == pytest.approx(2.0 / (1 / mu1 + 1 / mu2), rel=1e-12)
        assert oracle[3, 3] == pytest.approx(0.5 * (mu1 + mu2), rel=1e-12)


class TestRandomFields:
    def _random_field(self, n, seed):
        rng = np.random.default_rng(seed)
        rho = rng.uniform(0.0, 1.0, size=n**3)
        C1 = isotropic_stiffness(10.0, 0.3)
        C0 = isotropic_stiffness(1e-3, 0.3)
        return C0 + rho[:, None, None] * (C1 - C0), rho

    def test_symmetry_and_positive_definiteness(self):
        C_field, _ = self._random_field(4, 11)
        _, _, CH = solve_field(4, C_field)
        assert np.max(np.abs(CH - CH.T)) <= 1e-8 * np.max(np.abs(CH))
        assert np.all(np.linalg.eigvalsh(CH) > 0.0)

    def test_voigt_upper_bound(self):
        C_field, _ = self._random_field(4, 12)
        _, _, CH = solve_field(4, C_field)
        C_avg = C_field.mean(axis=0)
        gap = np.linalg.eigvalsh(C_avg - CH)
        assert np.all(gap > -1e-10)

    def test_monotone_in_material(self):
        C_field, rho = self._random_field(4, 13)
        _, _, CH_a = solve_field(4, C_field)
        C1 = isotropic_stiffness(10.0, 0.3)
        C0 = isotropic_stiffness(1e-3, 0.3)
        stiffer = C0 + np.minimum(rho + 0.2, 1.0)[:, None, None] * (C1 - C0)
        _, _, CH_b = solve_field(4, stiffer)
        assert bulk_modulus(CH_b) > bulk_modulus(CH_a)
        assert shear_modulus(CH_b) > shear_modulus(CH_a)
        # pointwise stiffer material can only stiffen every macroscopic mode
        assert np.all(np.linalg.eigvalsh(CH_b - CH_a) > -1e-10)

    def test_direct_and_cg_agree(self):
        C_field, _ = self._random_field(3, 14)
        _, _, CH_cg = solve_field(3, C_field, method="cg")
        _, _, CH_lu = solve_field(3, C_field, method="direct")
        np.testing.assert_allclose(CH_cg, CH_lu, rtol=1e-8, atol=1e-12)


class TestSolverContract:
    def test_residuals_within_tolerance(self):
        C1 = isotropic_stiffness(10.0, 0.3)
        C2 = isotropic_stiffness(5.0, 0.3)
        _, sol, _ = solve_field(4, x_layered_field(4, C1, C2))
        assert np.all(sol.residuals <= 1e-9)

    def test_nonconvergence_raises_with_residuals(self):
        C1 = isotropic_stiffness(10.0, 0.3)
        C2 = isotropic_stiffness(5.0, 0.3)
        op = PeriodicOperator(build_grid(4))
        with pytest.raises(SolverFailure) as exc:
            assemble_and_solve(op, x_layered_field(4, C1, C2), maxiter=1)
        assert exc.value.residuals.shape == (6,)
        assert np.any(exc.value.residuals > 1e-10)

    def test_unknown_method_rejected(self):
        op = PeriodicOperator(build_grid(2))
        C = np.broadcast_to(isotropic_stiffness(1.0, 0.3), (8, 6, 6)).copy()
        with pytest.raises(ValueError):
            assemble_and_solve(op, C, method="cholesky")


class TestScalarModuli:
    def test_zero_tensor(self):
        Z = np.zeros((6, 6))
        assert bulk_modulus(Z) == 0.0
        assert shear_modulus(Z) == 0.0
        with pytest.raises(ZeroDivisionError):
            poisson_ratio(Z)

    def test_poisson_scale_invariant(self):
        C = isotropic_stiffness(10.0, 0.3)
        assert poisson_ratio(C) == pytest.approx(0.3, rel=1e-12)
        assert poisson_ratio(1e-4 * C) == pytest.approx(0.3, rel=1e-12)

    def test_bulk_from_block_sum(self):
        C = isotropic_stiffness(10.0, 0.3)
        lam, mu = C[0, 1], C[3, 3]
        assert bulk_modulus(C) == pytest.approx(lam + 2 * mu / 3, rel=1e-12)
