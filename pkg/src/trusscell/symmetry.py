"""Reflection symmetry: map evaluation points into a reference region.

Design bars live in a reference wedge of the unit cell; the density field at
any point is evaluated by first reflecting the point into that wedge. The
cubic group (3 axis-aligned mid-planes + 6 diagonal planes, 48 elements) gets
a closed-form fast path: take coordinates relative to the cell center, then
absolute value per axis, then sort descending. General plane sets fall back
to a chamber walk across Householder reflections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import Bar

Array = NDArray[np.float64]

_CHAMBER_WALK_LIMIT = 256


def _cubic_plane_normals() -> Array:
    normals = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
    # diagonal planes x_i = +/- x_j, normals (e_i -/+ e_j)/sqrt(2)
    for i in range(3):
        for j in range(i + 1, 3):
            for s in (1.0, -1.0):
                n = np.zeros(3)
                n[i], n[j] = 1.0, -s
                normals.append(list(n / np.sqrt(2.0)))
    return np.asarray(normals)


@dataclass(frozen=True)
class SymmetryGroup:
    """Reflection planes through the cell center defining a reference wedge.

    The reference region is {p : n_s . (p - center) >= 0 for all s}. `cubic`
    is True only for the canonical 9-plane set, enabling the abs/sort map.
    """

    center: Array
    normals: Array  # (n_planes, 3), unit normals
    cubic: bool

    @staticmethod
    def none(center: Array) -> "SymmetryGroup":
        return SymmetryGroup(
            center=np.asarray(center, dtype=float),
            normals=np.zeros((0, 3)),
            cubic=False,
        )

    @staticmethod
    def cubic_group(center: Array) -> "SymmetryGroup":
        return SymmetryGroup(
            center=np.asarray(center, dtype=float),
            normals=_cubic_plane_normals(),
            cubic=True,
        )

    @staticmethod
    def from_planes(center: Array, normals: Array) -> "SymmetryGroup":
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("symmetry plane normal must be nonzero")
        return SymmetryGroup(center=np.asarray(center, dtype=float), normals=normals / norms[:, None], cubic=False)


def householder(normal: Array) -> Array:
    """Reflection matrix I - 2 n n^T across the plane with unit normal n."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return np.eye(3) - 2.0 * np.outer(n, n)


def reflect_to_reference(points: Array, group: SymmetryGroup) -> Array:
    """Map each point to its orbit representative inside the reference wedge.

    Idempotent and distance-preserving per orbit (compositions of isometries).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if group.normals.shape[0] == 0:
        return p.copy()
    u = p - group.center
    if group.cubic:
        u = np.sort(np.abs(u), axis=1)[:, ::-1]
        return u + group.center
    out = u.copy()
    # chamber walk: reflect across the most violated plane until inside.
    # Terminate on a small negative tolerance, not exact zero: reflections
    # introduce ulp-level violations that can otherwise ping-pong forever
    # between planes for points on chamber walls.
    tol = 1e-12 * max(1.0, float(np.max(np.abs(out))) if out.size else 1.0)
    for _ in range(_CHAMBER_WALK_LIMIT):
        dots = out @ group.normals.T
        worst = np.argmin(dots, axis=1)
        worst_dot = dots[np.arange(len(out)), worst]
        todo = worst_dot < -tol
        if not np.any(todo):
            return out + group.center
        n = group.normals[worst[todo]]
        out[todo] -= 2.0 * worst_dot[todo, None] * n
    raise RuntimeError("reflection chamber walk did not terminate; plane set is not a finite reflection group")


def in_reference_region(points: Array, group: SymmetryGroup, tol: float = 0.0) -> NDArray[np.bool_]:
    """True where every plane's signed distance is >= -tol."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if group.normals.shape[0] == 0:
        return np.ones(len(p), dtype=bool)
    dots = (p - group.center) @ group.normals.T
    return np.all(dots >= -tol, axis=1)


def group_elements(group: SymmetryGroup) -> Array:
    """All orthogonal matrices generated by the reflection planes.

    Closure by repeated products; for the cubic set this yields the 48
    signed-permutation matrices.
    """
    if group.normals.shape[0] == 0:
        return np.eye(3)[None, :, :]
    gens = [householder(n) for n in group.normals]
    elements = [np.eye(3)]

    def _find(m: Array) -> bool:
        return any(np.allclose(m, e, atol=1e-12) for e in elements)

    frontier = [np.eye(3)]
    while frontier:
        nxt = []
        for e in frontier:
            for g in gens:
                m = g @ e
                if not _find(m):
                    elements.append(m)
                    nxt.append(m)
        frontier = nxt
        if len(elements) > 1024:
            raise RuntimeError("reflection group closure exceeded 1024 elements")
    return np.asarray(elements)


def replicate_bars(bars: list[Bar], group: SymmetryGroup) -> list[Bar]:
    """Full symmetry orbit of each bar, duplicates removed.

    A copy is the bar with both endpoints mapped by a group element about the
    center; a bar invariant under part of the group yields fewer copies.
    Endpoint pairs are unordered for deduplication.
    """
    elements = group_elements(group)
    out = []
    seen = set()
    for bar in bars:
        for rot in elements:
            y0 = group.center + rot @ (bar.x0 - group.center)
            yf = group.center + rot @ (bar.xf - group.center)
            key = tuple(sorted((tuple(np.round(y0, 9)), tuple(np.round(yf, 9)))))
            if key in seen:
                continue
            seen.add(key)
            copy = bar.copy()
            copy.x0, copy.xf = y0, yf
            out.append(copy)
    return out
