"""Smooth max/Heaviside primitives shared by projection and constraints.

All aggregates are upper bounds or smooth surrogates of max() with a fixed
sharpness k. Inputs are plain ndarrays; every function is overflow-safe via
max-shifting, so k*x in the hundreds is fine.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]


def ks_max(values: Array, k: float, axis: int = -1) -> Array | float:
    """Kreisselmeier-Steinhauser aggregate (1/k)*ln(sum exp(k*x)).

    Overestimates max(x) by at most ln(n)/k. Empty input is invalid.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[axis if axis >= 0 else v.ndim + axis] == 0:
        raise ValueError("ks_max of an empty value set")
    m = np.max(v, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(k * (v - m)), axis=axis)) / k
    return float(out) if np.ndim(out) == 0 else out


def ks_weights(values: Array, k: float, axis: int = -1) -> Array:
    """d ks_max / d x_i: the softmax weights exp(k*x_i)/sum exp(k*x_j)."""
    v = np.asarray(values, dtype=float)
    m = np.max(v, axis=axis, keepdims=True)
    e = np.exp(k * (v - m))
    return e / np.sum(e, axis=axis, keepdims=True)


def lks_max(values: Array, k: float, axis: int = -1) -> Array | float:
    """Lowered KS aggregate (1/k)*ln(mean exp(k*x)); lies below max(x)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[axis if axis >= 0 else v.ndim + axis]
    return ks_max(v, k, axis=axis) - np.log(n) / k


def lks_weights(values: Array, k: float, axis: int = -1) -> Array:
    """d lks_max / d x_i; identical to the KS softmax weights."""
    return ks_weights(values, k, axis=axis)


def smooth_heaviside(x: Array | float, eps: float, p_exp: float) -> Array | float:
    """Regularized step: 0 below -eps, 1 above +eps, polynomial-sine bridge.

    H(x) = (1/2 + x/(2 eps) + sin(pi x / eps)/(2 pi))**p_exp on [-eps, eps].
    The bracket hits exactly 0 and 1 at the band edges with zero slope, so H
    is C1 for any p_exp >= 1.
    """
    x = np.asarray(x, dtype=float)
    xi = np.clip(x / eps, -1.0, 1.0)
    # roundoff in sin(pi*xi) can push the bracket a few ulp outside [0, 1],
    # which would NaN under fractional exponents
    bracket = np.clip(0.5 + 0.5 * xi + np.sin(np.pi * xi) / (2.0 * np.pi), 0.0, 1.0)
    out = np.where(x <= -eps, 0.0, np.where(x >= eps, 1.0, bracket**p_exp))
    return float(out) if np.ndim(out) == 0 else out


def smooth_heaviside_grad(x: Array | float, eps: float, p_exp: float) -> Array | float:
    """dH/dx; vanishes outside [-eps, eps] and at the band edges."""
    x = np.asarray(x, dtype=float)
    xi = np.clip(x / eps, -1.0, 1.0)
    bracket = np.clip(0.5 + 0.5 * xi + np.sin(np.pi * xi) / (2.0 * np.pi), 0.0, 1.0)
    dbracket = (0.5 + 0.5 * np.cos(np.pi * xi)) / eps
    inside = (x > -eps) & (x < eps)
    out = np.where(inside, p_exp * bracket ** (p_exp - 1.0) * dbracket, 0.0)
    return float(out) if np.ndim(out) == 0 else out
