"""Chain rule from homogenized properties back to bar parameters.

Every differentiated quantity here is a linear functional of the per-element
material densities, sum_ei P[e, i] * rho_eff[e, i]: objectives contract the
energy-weight tensor Q with an objective weight matrix, the weight constraint
uses constant coefficients. Gradients accumulate per bar over its sparsity
support only.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .design import DesignVector
from .geometry import Bar
from .projection import ProjectionSettings, ProjectionState, bar_support

Array = NDArray[np.float64]


def sparsity_map(bars: list[Bar], points: Array, settings: ProjectionSettings, margin: float = 1e-9) -> list[NDArray[np.intp]]:
    """Per-bar indices of evaluation points the bar can influence."""
    return [bar_support(bar, points, settings, margin) for bar in bars]


def field_functional_gradient(
    P: Array,
    state: ProjectionState,
    layout: DesignVector,
    supports: list[NDArray[np.intp]],
) -> Array:
    """Gradient of sum_ei P[e,i] rho_eff[e,i] w.r.t. the scaled design vector."""
    grad = np.zeros(layout.size)
    for q in range(len(state.bars)):
        idx = supports[q]
        if len(idx) == 0:
            continue
        bar_grad = state.bar_gradient(q, idx)  # (n_sel, n_mat, 6 + n_mat)
        grad[q * layout.block : (q + 1) * layout.block] = np.einsum("ei,eip->p", P[idx], bar_grad)
    return layout.physical_to_scaled_grad(grad)


def objective_weight_matrix(problem: str, CH: Array) -> Array:
    """6x6 weights L with d(property) = sum_ab L[a,b] dC^H[a,b].

    For the Poisson ratio the weights are the quotient-rule coefficients at
    the current tensor, so they must be rebuilt each iteration.
    """
    L = np.zeros((6, 6))
    if problem == "max_bulk":
        L[:3, :3] = 1.0 / 9.0
    elif problem == "max_shear":
        L[3, 3] = L[4, 4] = L[5, 5] = 1.0 / 3.0
    elif problem == "min_poisson":
        x, y = CH[0, 1], CH[5, 5]
        den = 2.0 * (x + y) ** 2
        if den == 0.0:
            raise ZeroDivisionError("Poisson sensitivity undefined: C_1122 + C_1212 = 0")
        # dnu/dC_1122 split across the symmetric off-diagonal pair
        L[0, 1] = L[1, 0] = 0.5 * y / den
        L[5, 5] = -x / den
    else:
        raise ValueError(f"unknown problem '{problem}'")
    return L


def property_gradient(
    L: Array,
    Q: Array,
    state: ProjectionState,
    layout: DesignVector,
    supports: list[NDArray[np.intp]],
) -> Array:
    """Gradient of sum_ab L[a,b] C^H[a,b] through the density field."""
    P = np.einsum("ab,eiab->ei", L, Q)
    return field_functional_gradient(P, state, layout, supports)


def kkt_residual(
    x: Array,
    df0dx: Array,
    g: Array,
    dgdx: Array,
    xmin: Array,
    xmax: Array,
    active_tol: float = 1e-5,
    bound_tol: float = 1e-6,
) -> float:
    """Max-norm KKT stationarity residual with nonnegative multipliers.

    Multipliers for near-active constraints come from a nonnegative least
    squares fit of stationarity; bound components only count when they push
    into the feasible box.
    """
    from scipy.optimize import nnls

    g = np.atleast_1d(np.asarray(g, dtype=float))
    dgdx = np.asarray(dgdx, dtype=float).reshape(len(g), len(x)) if g.size else np.zeros((0, len(x)))
    active = np.flatnonzero(g >= -active_tol)
    r = np.asarray(df0dx, dtype=float).copy()
    if len(active):
        lam, _ = nnls(dgdx[active].T, -r)
        r = r + dgdx[active].T @ lam
    at_lower = x <= xmin + bound_tol
    at_upper = x >= xmax - bound_tol
    r = np.where(at_lower, np.minimum(r, 0.0), r)
    r = np.where(at_upper, np.maximum(r, 0.0), r)
    viol = np.max(np.maximum(g, 0.0)) if g.size else 0.0
    return float(max(np.max(np.abs(r)), viol))
