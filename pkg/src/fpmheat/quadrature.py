"""Quadrature rules on partition cells and faces.

Cells are decomposed into simplices fanned from the cell centroid and each
simplex carries a strictly-interior degree-2 rule, so piecewise materials
are never sampled exactly on an interface. Face rules are 2-point Gauss on
segments and a degree-2 triangle rule on fanned 3D polygons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Partition

# degree-2 rule on the triangle, barycentric (2/3, 1/6, 1/6) permutations
_TRI_BARY = np.array(
    [[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
     [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
     [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]]
)
# degree-2 rule on the tetrahedron
_TET_A = 0.5854101966249685
_TET_B = 0.1381966011250105
_TET_BARY = np.array(
    [[_TET_A, _TET_B, _TET_B, _TET_B],
     [_TET_B, _TET_A, _TET_B, _TET_B],
     [_TET_B, _TET_B, _TET_A, _TET_B],
     [_TET_B, _TET_B, _TET_B, _TET_A]]
)
_GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class QuadratureRule:
    """Per-cell and per-face quadrature points and weights."""

    cell_points: tuple  # of (nq, d) arrays
    cell_weights: tuple  # of (nq,) arrays
    face_points: tuple
    face_weights: tuple


def _triangles_from_polygon(poly):
    """Fan a convex polygon into triangles from its first vertex."""
    return [(poly[0], a, b) for a, b in zip(poly[1:-1], poly[2:])]


def _cell_rule_2d(cell):
    verts = cell.vertices
    c = cell.centroid
    pts, wts = [], []
    for a, b in zip(verts, np.roll(verts, -1, axis=0)):
        tri = np.array([c, a, b])
        u, v = a - c, b - c
        area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
        if area == 0.0:
            continue
        pts.append(_TRI_BARY @ tri)
        wts.append(np.full(3, area / 3.0))
    return np.vstack(pts), np.concatenate(wts)


def _cell_rule_3d(cell, faces, cell_id):
    c = cell.centroid
    pts, wts = [], []
    for f in faces:
        poly = f.vertices if f.cells[0] == cell_id else f.vertices[::-1]
        for v0, a, b in _triangles_from_polygon(poly):
            tet = np.array([c, v0, a, b])
            vol = np.linalg.det(np.array([v0 - c, a - c, b - c])) / 6.0
            if vol <= 0.0:
                vol = abs(vol)
            if vol == 0.0:
                continue
            pts.append(_TET_BARY @ tet)
            wts.append(np.full(4, vol / 4.0))
    return np.vstack(pts), np.concatenate(wts)


def _face_rule(face, dim):
    if dim == 2:
        a, b = face.vertices
        pts = a[None, :] + _GAUSS2[:, None] * (b - a)[None, :]
        wts = np.full(2, 0.5 * face.measure)
        return pts, wts
    poly = face.vertices
    c = poly.mean(axis=0)
    pts, wts = [], []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        tri = np.array([c, a, b])
        area = 0.5 * np.linalg.norm(np.cross(a - c, b - c))
        if area == 0.0:
            continue
        pts.append(_TRI_BARY @ tri)
        wts.append(np.full(3, area / 3.0))
    return np.vstack(pts), np.concatenate(wts)


def build_quadrature(partition: Partition) -> QuadratureRule:
    """Degree->=2 rules for every cell and face of the partition."""
    d = partition.dim
    cell_pts, cell_wts = [], []
    for i, cell in enumerate(partition.cells):
        if d == 2:
            p, w = _cell_rule_2d(cell)
        else:
            p, w = _cell_rule_3d(cell, partition.cell_faces(i), i)
        cell_pts.append(p)
        cell_wts.append(w)
    face_pts, face_wts = [], []
    for f in partition.faces:
        p, w = _face_rule(f, d)
        face_pts.append(p)
        face_wts.append(w)
    return QuadratureRule(
        cell_points=tuple(cell_pts),
        cell_weights=tuple(cell_wts),
        face_points=tuple(face_pts),
        face_weights=tuple(face_wts),
    )
