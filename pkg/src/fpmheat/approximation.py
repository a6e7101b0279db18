"""Gradient operators and shape-function rows on Voronoi supports.

The support of a cell is its generating point plus all Voronoi first
neighbors. A least-squares fit of the neighbor offsets (unit weights)
yields a matrix mapping support temperatures to a constant cell gradient;
the shape row evaluates the cell's linear trial function at a location.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSupport, SingularSupport
from .geometry import Partition, PointCloud

COND_LIMIT = 1e12  # on the normal matrix of the least-squares fit


@dataclass(frozen=True)
class GradientOperator:
    """Maps support temperatures to the constant gradient of one cell.

    ``support`` lists point ids, the generating point first. ``matrix`` is
    d x (m+1); each of its rows sums to zero, so constants are annihilated
    and any linear field is differentiated exactly.
    """

    support: np.ndarray  # (m+1,) int
    matrix: np.ndarray  # (d, m+1)

    @property
    def size(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ShapeRow:
    """Values of a cell's trial basis at one location (partition of unity)."""

    support: np.ndarray
    values: np.ndarray  # (m+1,)


def gfd_operator(cell_id: int, partition: Partition, points: PointCloud) -> GradientOperator:
    """Least-squares gradient operator of one cell from its Voronoi neighbors.

    Raises InsufficientSupport when the neighbor count is below the spatial
    dimension and SingularSupport when the neighbors are collinear/coplanar
    (condition of the normal matrix beyond COND_LIMIT).
    """
    coords = points.coords
    d = points.dim
    neighbors = partition.adjacency[cell_id]
    m = len(neighbors)
    if m < d:
        raise InsufficientSupport(
            f"cell {cell_id} has {m} neighbors, fewer than the dimension {d}; add points"
        )
    offsets = coords[neighbors] - coords[cell_id]  # (m, d)
    s = np.linalg.svd(offsets, compute_uv=False)
    if s[-1] == 0.0 or (s[0] / s[-1]) ** 2 > COND_LIMIT:
        raise SingularSupport(
            f"cell {cell_id} support is (near) collinear: cond={np.inf if s[-1] == 0 else (s[0]/s[-1])**2:.2e}"
        )
    # solve min ||offsets @ g - (u_i - u_0)||: g = pinv(offsets) @ (u_i - u_0)
    pinv = np.linalg.pinv(offsets, rcond=1e-13)
    matrix = np.empty((d, m + 1))
    matrix[:, 0] = -pinv.sum(axis=1)
    matrix[:, 1:] = pinv
    support = np.concatenate([[cell_id], neighbors]).astype(int)
    return GradientOperator(support=support, matrix=matrix)


def gfd_operators(partition: Partition, points: PointCloud) -> list[GradientOperator]:
    """Gradient operators for every cell."""
    return [gfd_operator(i, partition, points) for i in range(partition.n)]


def shape_row(x, cell_id: int, gradient_op: GradientOperator, points: PointCloud) -> ShapeRow:
    """Trial-basis row of a cell at location x: (x - x0) mapped through the
    gradient operator plus the Kronecker entry at the generating point."""
    x0 = points.coords[cell_id]
    values = (np.asarray(x, dtype=float) - x0) @ gradient_op.matrix
    values[0] += 1.0
    return ShapeRow(support=gradient_op.support, values=values)


def shape_values(xs, cell_id: int, gradient_op: GradientOperator, points: PointCloud) -> np.ndarray:
    """Shape rows at many locations at once: (n, m+1)."""
    x0 = points.coords[cell_id]
    vals = (np.atleast_2d(np.asarray(xs, dtype=float)) - x0) @ gradient_op.matrix
    vals[:, 0] += 1.0
    return vals
