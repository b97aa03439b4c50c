"""Periodic voxel grid of trilinear hexahedra over the cubic unit cell.

Periodicity is imposed by DOF identification: every node on a max face is the
slave of its wrapped image, so the assembled operator acts on the n^3 unique
nodes and stays symmetric positive definite once the rigid translation is
pinned at the node nearest the cell center.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]
IntArray = NDArray[np.intp]


@dataclass
class UnitCellGrid:
    """n x n x n element grid on [0, edge]^3 with periodic node numbering."""

    n: int
    edge: float
    h: float = field(init=False)
    n_elements: int = field(init=False)
    n_nodes_full: int = field(init=False)  # (n+1)^3 lattice nodes
    n_nodes: int = field(init=False)  # n^3 unique nodes after identification
    n_slave_nodes: int = field(init=False)
    n_dofs: int = field(init=False)
    centroids: Array = field(init=False)  # (n_elements, 3)
    edof: IntArray = field(init=False)  # (n_elements, 24) reduced DOF ids
    pinned_node: int = field(init=False)  # reduced id of the center node
    pinned_dofs: IntArray = field(init=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("grid needs at least 2 elements per edge")
        if self.edge <= 0.0:
            raise ValueError("cell edge must be positive")
        n = self.n
        self.h = self.edge / n
        self.n_elements = n**3
        self.n_nodes_full = (n + 1) ** 3
        self.n_nodes = n**3
        self.n_slave_nodes = self.n_nodes_full - self.n_nodes
        self.n_dofs = 3 * self.n_nodes

        idx = np.arange(n)
        k, j, i = np.meshgrid(idx, idx, idx, indexing="ij")  # element lattice, x fastest
        i, j, k = i.ravel(), j.ravel(), k.ravel()
        self.centroids = np.column_stack([(i + 0.5) * self.h, (j + 0.5) * self.h, (k + 0.5) * self.h])

        # corner (a, b, c) of element (i, j, k) is lattice node (i+a, j+b, k+c),
        # wrapped mod n onto the unique set; local order l = a + 2b + 4c
        corner_nodes = np.empty((self.n_elements, 8), dtype=np.intp)
        for c in range(2):
            for b in range(2):
                for a in range(2):
                    l = a + 2 * b + 4 * c
                    ni, nj, nk = (i + a) % n, (j + b) % n, (k + c) % n
                    corner_nodes[:, l] = ni + n * (nj + n * nk)
        self.edof = (3 * corner_nodes[:, :, None] + np.arange(3)[None, None, :]).reshape(self.n_elements, 24)

        mid = n // 2
        self.pinned_node = mid + n * (mid + n * mid)
        self.pinned_dofs = 3 * self.pinned_node + np.arange(3)

    @property
    def element_volume(self) -> float:
        return self.h**3

    @property
    def cell_volume(self) -> float:
        return self.edge**3

    @property
    def center(self) -> Array:
        return np.full(3, 0.5 * self.edge)


def build_grid(n: int, edge: float = 1.0) -> UnitCellGrid:
    return UnitCellGrid(n=n, edge=edge)
