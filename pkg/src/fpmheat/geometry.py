"""Voronoi partition of a convex 2D/3D domain from a scattered point cloud.

Each point owns one convex cell (the set of locations closer to it than to
any other point, clipped to the domain). Cells are built independently by
half-space clipping: the domain's half-spaces plus the perpendicular
bisectors of nearby points. Faces between cells carry the geometry needed
by the weak-form assembly: measure, unit normal, and a length scale h_e.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, KDTree, QhullError

from .errors import DegenerateInput, EmptyCell, FpmHeatError, InvalidPenalty, IoError


class FaceKind(Enum):
    INTERNAL = "internal"
    BOUNDARY = "boundary"  # on the domain boundary, not yet assigned to a bc region
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"
    SYMMETRIC = "symmetric"
    CRACK = "crack"


class HePolicy(Enum):
    """How the penalty length scale h_e of a face is defined."""

    FACE_MEASURE = "face_measure"  # length (2D) or sqrt(area) (3D)
    POINT_DISTANCE = "point_distance"  # distance between the generating points


@dataclass(frozen=True)
class PointCloud:
    """Scattered points with a per-point on-the-boundary flag."""

    coords: np.ndarray  # (n, d)
    boundary_flag: np.ndarray  # (n,) bool

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=float))
        flags = np.asarray(self.boundary_flag, dtype=bool)
        if coords.ndim != 2 or coords.shape[1] not in (2, 3):
            raise ValueError("coords must have shape (n, 2) or (n, 3)")
        if flags.shape != (coords.shape[0],):
            raise ValueError("boundary_flag must have one entry per point")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "boundary_flag", flags)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        """Read a point cloud from CSV with columns x,y[,z],boundary_flag."""
        try:
            with open(path, newline="") as f:
                rows = list(csv.reader(f))
        except OSError as exc:
            raise IoError(f"cannot read point file {path}: {exc}") from exc
        if not rows:
            raise IoError(f"point file {path} is empty")
        header = [c.strip().lower() for c in rows[0]]
        if header[:2] == ["x", "y"]:
            rows = rows[1:]
        data = np.array([[float(v) for v in r] for r in rows if r])
        if data.shape[1] not in (3, 4):
            raise IoError("point CSV needs columns x,y[,z],boundary_flag")
        return cls(coords=data[:, :-1], boundary_flag=data[:, -1] != 0.0)

    def to_csv(self, path) -> None:
        d = self.dim
        header = ["x", "y", "z"][:d] + ["boundary_flag"]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for x, b in zip(self.coords, self.boundary_flag):
                w.writerow([f"{v:.17g}" for v in x] + [int(b)])


@dataclass(frozen=True)
class ConvexDomain:
    """Bounded intersection of half-spaces ``normal . x <= offset``."""

    normals: np.ndarray  # (m, d), unit outward
    offsets: np.ndarray  # (m,)
    vertices: np.ndarray  # (nv, d)
    interior_point: np.ndarray  # (d,), strictly inside

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @classmethod
    def from_halfspaces(cls, normals, offsets) -> "ConvexDomain":
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        norms = np.linalg.norm(normals, axis=1)
        normals = normals / norms[:, None]
        offsets = offsets / norms
        center, radius = _chebyshev_center(normals, offsets)
        if radius <= 0:
            raise ValueError("half-spaces have empty interior")
        try:
            hs = np.hstack([normals, -offsets[:, None]])
            hsi = HalfspaceIntersection(hs, center)
        except QhullError as exc:
            raise ValueError(f"domain is unbounded or degenerate: {exc}") from exc
        verts = _dedup_points(hsi.intersections, 1e-12 * (1.0 + np.abs(offsets).max()))
        return cls(normals=normals, offsets=offsets, vertices=verts, interior_point=center)

    @classmethod
    def from_box(cls, lo, hi) -> "ConvexDomain":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.size
        if np.any(hi <= lo):
            raise ValueError("box must have hi > lo componentwise")
        eye = np.eye(d)
        normals = np.vstack([eye, -eye])
        offsets = np.concatenate([hi, -lo])
        return cls.from_halfspaces(normals, offsets)

    @classmethod
    def from_polygon(cls, vertices) -> "ConvexDomain":
        """Convex polygon from counterclockwise-ordered 2D vertices."""
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ValueError("need at least 3 vertices of shape (n, 2)")
        normals, offsets = [], []
        for a, b in zip(verts, np.roll(verts, -1, axis=0)):
            t = b - a
            n = np.array([t[1], -t[0]])
            n /= np.linalg.norm(n)
            normals.append(n)
            offsets.append(n @ a)
        return cls.from_halfspaces(np.array(normals), np.array(offsets))

    @classmethod
    def from_convex_vertices(cls, vertices) -> "ConvexDomain":
        """Convex hull of a 3D vertex cloud."""
        hull = ConvexHull(np.asarray(vertices, dtype=float))
        # qhull equations are [normal, -offset] with normal . x <= offset outside-positive
        eqs = np.unique(np.round(hull.equations, 12), axis=0)
        return cls.from_halfspaces(eqs[:, :-1], -eqs[:, -1])

    def diameter(self) -> float:
        v = self.vertices
        diffs = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1)).max())

    def volume(self) -> float:
        return float(ConvexHull(self.vertices).volume)

    def contains(self, points, tol: float = 1e-10) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slack = self.offsets[None, :] - pts @ self.normals.T
        return slack.min(axis=1) >= -tol * max(1.0, self.diameter())


@dataclass(frozen=True)
class Face:
    """One partition face: a segment (2D) or planar polygon (3D).

    ``cells`` is (owner,) for boundary faces or (E1, E2) for internal
    faces, in which case ``normal`` points from E1 into E2.
    ``cell_points`` carries the generating point coordinates of ``cells``.
    """

    kind: FaceKind
    cells: tuple
    vertices: np.ndarray  # (2, 2) segment or (nv, 3) ordered polygon
    measure: float
    normal: np.ndarray
    h_e: float
    cell_points: np.ndarray
    region: int | None = None
    domain_plane: int | None = None

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


@dataclass(frozen=True)
class Cell:
    """Convex cell of one generating point."""

    vertices: np.ndarray  # deduplicated corners; CCW-ordered in 2D
    volume: float
    centroid: np.ndarray
    face_ids: tuple = ()


@dataclass(frozen=True)
class CrackSpec:
    """Adiabatic crack geometry: segments (2D) or planar polygons (3D)."""

    segments: tuple = ()  # 2D: tuple of (2, 2) arrays
    polygons: tuple = ()  # 3D: tuple of (nv, 3) planar arrays

    @classmethod
    def from_segment(cls, a, b) -> "CrackSpec":
        return cls(segments=(np.array([a, b], dtype=float),))

    @classmethod
    def from_polygon(cls, vertices) -> "CrackSpec":
        return cls(polygons=(np.asarray(vertices, dtype=float),))


@dataclass(frozen=True)
class Partition:
    """Voronoi partition: per-point cells, the face list, and adjacency."""

    points: PointCloud
    domain: ConvexDomain
    cells: tuple  # of Cell
    faces: tuple  # of Face
    adjacency: tuple  # of int ndarrays

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def dim(self) -> int:
        return self.points.dim

    def cell_faces(self, i: int):
        return [self.faces[f] for f in self.cells[i].face_ids]

    def with_faces(self, faces, adjacency=None) -> "Partition":
        """Rebuild with a replaced face list, refreshing per-cell face ids."""
        faces = tuple(faces)
        by_cell: list[list[int]] = [[] for _ in range(self.n)]
        for fi, f in enumerate(faces):
            for c in f.cells:
                by_cell[c].append(fi)
        cells = tuple(
            replace(c, face_ids=tuple(by_cell[i])) for i, c in enumerate(self.cells)
        )
        if adjacency is None:
            adjacency = _adjacency_from_faces(self.n, faces)
        return replace(self, cells=cells, faces=faces, adjacency=tuple(adjacency))


def _chebyshev_center(normals, offsets):
    """Largest inscribed ball center of {x : normals.x <= offsets}."""
    m, d = normals.shape
    a_ub = np.hstack([normals, np.ones((m, 1))])
    res = linprog(
        c=np.concatenate([np.zeros(d), [-1.0]]),
        A_ub=a_ub,
        b_ub=offsets,
        bounds=[(None, None)] * d + [(0, None)],
        method="highs",
    )
    if not res.success:
        return np.zeros(d), -1.0
    return res.x[:d], float(res.x[d])


def _dedup_points(points, tol):
    """Merge points closer than tol, keeping first occurrences (deterministic)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    taken = np.zeros(len(pts), dtype=bool)
    keep: list[int] = []
    for i in range(len(pts)):
        if taken[i]:
            continue
        keep.append(i)
        taken |= d2[i] <= tol * tol
    return pts[keep]


def _order_polygon_3d(verts, normal):
    """Order coplanar 3D points counterclockwise as seen from the normal side."""
    c = verts.mean(axis=0)
    t1 = np.cross(normal, [1.0, 0.0, 0.0])
    if np.linalg.norm(t1) < 1e-8:
        t1 = np.cross(normal, [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    rel = verts - c
    ang = np.arctan2(rel @ t2, rel @ t1)
    return verts[np.argsort(ang, kind="stable")]


def _polygon_area_3d(verts):
    v0 = verts[0]
    area = 0.0
    for a, b in zip(verts[1:-1], verts[2:]):
        area += 0.5 * np.linalg.norm(np.cross(a - v0, b - v0))
    return area


def _order_polygon_2d(verts):
    c = verts.mean(axis=0)
    rel = verts - c
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return verts[np.argsort(ang, kind="stable")]


def _polygon_area_centroid_2d(verts):
    """Shoelace area and centroid of a CCW polygon."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _cell_volume_centroid_3d(face_polys):
    """Volume and centroid from outward-oriented face polygons."""
    apex = np.mean(np.vstack([p for p, _ in face_polys]), axis=0)
    vol = 0.0
    moment = np.zeros(3)
    for poly, _normal in face_polys:
        v0 = poly[0]
        for a, b in zip(poly[1:-1], poly[2:]):
            tet = np.linalg.det(np.array([v0 - apex, a - apex, b - apex])) / 6.0
            vol += tet
            moment += tet * (apex + v0 + a + b) / 4.0
    if vol <= 0:
        raise EmptyCell("cell collapsed to non-positive volume")
    return float(vol), moment / vol


def _adjacency_from_faces(n, faces):
    adj: list[set] = [set() for _ in range(n)]
    for f in faces:
        if f.kind is FaceKind.INTERNAL:
            i, j = f.cells
            adj[i].add(j)
            adj[j].add(i)
    return [np.array(sorted(s), dtype=int) for s in adj]


def _clip_cell(i, coords, tree, domain, diam):
    """Clip the domain by bisectors of nearby points; return (vertices, used ids)."""
    xi = coords[i]
    n_pts = len(coords)
    others = np.delete(np.arange(n_pts), i)
    if len(others) == 0:
        return domain.vertices.copy(), np.array([], dtype=int)
    dist = np.linalg.norm(coords[others] - xi, axis=1)
    order = others[np.lexsort((others, dist))]

    k = min(len(order), 24)
    used = order[:k]
    for attempt in range(12):
        if attempt == 11:
            used = order
        normals = coords[used] - xi
        mids = 0.5 * (coords[used] + xi)
        hs_a = np.vstack([domain.normals, normals / np.linalg.norm(normals, axis=1)[:, None]])
        hs_b = np.concatenate(
            [domain.offsets, np.einsum("ij,ij->i", normals, mids) / np.linalg.norm(normals, axis=1)]
        )
        feas = xi
        slack = hs_b - hs_a @ feas
        if slack.min() <= 1e-12 * diam:
            feas, radius = _chebyshev_center(hs_a, hs_b)
            if radius <= 1e-14 * diam:
                raise EmptyCell(f"point {i} has an empty cell (outside the domain?)")
        try:
            hsi = HalfspaceIntersection(np.hstack([hs_a, -hs_b[:, None]]), feas)
        except (QhullError, ValueError) as exc:
            raise EmptyCell(f"point {i} has a degenerate cell: {exc}") from exc
        verts = _dedup_points(hsi.intersections, 1e-9 * diam)
        radius = np.linalg.norm(verts - xi, axis=1).max()
        needed = tree.query_ball_point(xi, 2.0 * radius * (1.0 + 1e-12))
        needed = [j for j in needed if j != i]
        if set(needed) <= set(used.tolist()):
            return verts, used
        cutoff = np.searchsorted(np.sort(dist), 2.0 * radius * (1.0 + 1e-12), side="right")
        used = order[: max(cutoff, len(used) + 1)]
    return verts, used  # pragma: no cover - loop always terminates earlier


def build_partition(points: PointCloud, domain: ConvexDomain) -> Partition:
    """Build the Voronoi partition of ``domain`` generated by ``points``.

    Raises DegenerateInput for (near-)coincident points and EmptyCell when a
    point's cell clips away entirely (the point lies outside the domain).
    """
    coords = points.coords
    n, d = coords.shape
    if d != domain.dim:
        raise ValueError("point and domain dimensions differ")
    diam = domain.diameter()
    inside = domain.contains(coords)
    if not inside.all():
        raise EmptyCell(f"point {int(np.argmin(inside))} lies outside the domain")
    tree = KDTree(coords)
    if n > 1:
        dmin, jmin = tree.query(coords, k=2)
        closest = dmin[:, 1].min()
        if closest <= 1e-12 * diam:
            pair = int(np.argmin(dmin[:, 1]))
            raise DegenerateInput(
                f"points {pair} and {jmin[pair, 1]} coincide (distance {closest:.3e})"
            )

    prune = 1e-12 * diam ** (d - 1)
    plane_tol = 1e-9 * diam

    # Raw per-cell face data: {(i, j) or (i, None, plane): (verts, measure, normal)}
    raw_internal: dict[tuple, dict] = {}
    raw_boundary: list[tuple] = []
    cells: list[Cell] = []

    for i in range(n):
        verts, used = _clip_cell(i, coords, tree, domain, diam)
        if len(verts) < d + 1:
            raise EmptyCell(f"point {i} has an empty cell")
        face_polys = []  # (ordered poly, outward normal) for volume
        # Domain planes first (deterministic), then bisectors ordered by neighbor id.
        planes = [("domain", p, domain.normals[p], domain.offsets[p]) for p in range(len(domain.normals))]
        for j in sorted(used.tolist()):
            nrm = coords[j] - coords[i]
            nn = np.linalg.norm(nrm)
            planes.append(("bisector", j, nrm / nn, (nrm / nn) @ (0.5 * (coords[i] + coords[j]))))
        for tag, key, nrm, off in planes:
            on = verts[np.abs(verts @ nrm - off) <= plane_tol]
            if len(on) < d:
                continue
            if d == 2:
                t = np.array([-nrm[1], nrm[0]])
                params = on @ t
                lo, hi = params.argmin(), params.argmax()
                seg = np.array([on[lo], on[hi]])
                measure = float(params.max() - params.min())
                poly = seg
            else:
                poly = _order_polygon_3d(on, nrm)
                measure = float(_polygon_area_3d(poly))
            if measure <= prune:
                continue
            face_polys.append((poly, nrm))
            if tag == "domain":
                raw_boundary.append((i, key, poly, measure, nrm))
            else:
                j = key
                if i < j:
                    raw_internal[(i, j)] = {"verts": poly, "measure": measure, "normal": nrm, "seen": {i}}
                elif (j, i) in raw_internal:
                    raw_internal[(j, i)]["seen"].add(i)
        if d == 2:
            poly2 = _order_polygon_2d(verts)
            area, centroid = _polygon_area_centroid_2d(poly2)
            if area <= 0:
                raise EmptyCell(f"point {i} has an empty cell")
            cells.append(Cell(vertices=poly2, volume=area, centroid=centroid))
        else:
            vol, centroid = _cell_volume_centroid_3d(face_polys)
            cells.append(Cell(vertices=verts, volume=vol, centroid=centroid))

    faces: list[Face] = []
    for (i, j) in sorted(raw_internal):
        rec = raw_internal[(i, j)]
        if rec["seen"] != {i, j}:
            continue  # only one side kept it: below the prune threshold
        he = rec["measure"] if d == 2 else float(np.sqrt(rec["measure"]))
        faces.append(
            Face(
                kind=FaceKind.INTERNAL,
                cells=(i, j),
                vertices=rec["verts"],
                measure=rec["measure"],
                normal=rec["normal"],
                h_e=he,
                cell_points=coords[[i, j]],
            )
        )
    for (i, plane, poly, measure, nrm) in sorted(raw_boundary, key=lambda r: (r[0], r[1])):
        he = measure if d == 2 else float(np.sqrt(measure))
        faces.append(
            Face(
                kind=FaceKind.BOUNDARY,
                cells=(i,),
                vertices=poly,
                measure=measure,
                normal=nrm,
                h_e=he,
                cell_points=coords[[i]],
                domain_plane=plane,
            )
        )

    part = Partition(
        points=points,
        domain=domain,
        cells=tuple(cells),
        faces=(),
        adjacency=(),
    ).with_faces(faces)

    total = sum(c.volume for c in part.cells)
    vol = domain.volume()
    if abs(total - vol) > 1e-8 * vol:
        raise FpmHeatError(
            f"cell volumes sum to {total!r}, domain volume is {vol!r}; partition is inconsistent"
        )
    return part


def face_length_scale(face: Face, policy: HePolicy) -> float:
    """Length scale h_e of a face under the given policy."""
    if policy is HePolicy.FACE_MEASURE:
        return face.measure if face.vertices.shape[1] == 2 else float(np.sqrt(face.measure))
    if len(face.cells) == 2:
        return float(np.linalg.norm(face.cell_points[0] - face.cell_points[1]))
    dist = abs(float((face.cell_points[0] - face.vertices[0]) @ face.normal))
    he = 2.0 * dist
    if he <= 0.0:
        raise InvalidPenalty(
            "point-distance h_e is zero: the generating point lies on the boundary face"
        )
    return he


def _segments_cross(a, b, p, q):
    """True if the open segment a-b crosses the open segment p-q (2D)."""

    def cross(u, v):
        return u[0] * v[1] - u[1] * v[0]

    r = b - a
    s = q - p
    denom = cross(r, s)
    if denom == 0.0:
        return False
    t = cross(p - a, s) / denom
    u = cross(p - a, r) / denom
    return 0.0 < t < 1.0 and 0.0 < u < 1.0


def _segment_hits_polygon(a, b, poly):
    """True if the open segment a-b pierces the interior of a planar 3D polygon."""
    v0 = poly[0]
    nrm = np.cross(poly[1] - v0, poly[2] - v0)
    nn = np.linalg.norm(nrm)
    if nn == 0.0:
        return False
    nrm = nrm / nn
    sa = (a - v0) @ nrm
    sb = (b - v0) @ nrm
    if sa * sb >= 0.0:
        return False
    x = a + (b - a) * (sa / (sa - sb))
    # crossing-number test in the dominant projection plane
    drop = int(np.argmax(np.abs(nrm)))
    keep = [k for k in range(3) if k != drop]
    p2 = poly[:, keep]
    x2 = x[keep]
    inside = False
    for (x1, y1), (x2_, y2_) in zip(p2, np.roll(p2, -1, axis=0)):
        if (y1 > x2[1]) != (y2_ > x2[1]):
            t = (x2[1] - y1) / (y2_ - y1)
            if x2[0] < x1 + t * (x2_ - x1):
                inside = not inside
    return inside


def apply_crack(partition: Partition, crack: CrackSpec) -> Partition:
    """Reclassify internal faces cut by the crack as zero-flux Crack boundary faces.

    A face is cut when its two generating points lie on opposite sides of a
    crack primitive and their connecting segment crosses the primitive's
    interior. Each cut face becomes two Crack faces, one per cell, and the
    adjacency between the pair is removed.
    """
    d = partition.dim
    new_faces: list[Face] = []
    for f in partition.faces:
        if f.kind is not FaceKind.INTERNAL:
            new_faces.append(f)
            continue
        a, b = f.cell_points
        cut = False
        if d == 2:
            cut = any(_segments_cross(a, b, seg[0], seg[1]) for seg in crack.segments)
        else:
            cut = any(_segment_hits_polygon(a, b, poly) for poly in crack.polygons)
        if not cut:
            new_faces.append(f)
            continue
        i, j = f.cells
        for owner, nrm in ((i, f.normal), (j, -f.normal)):
            new_faces.append(
                Face(
                    kind=FaceKind.CRACK,
                    cells=(owner,),
                    vertices=f.vertices,
                    measure=f.measure,
                    normal=nrm,
                    h_e=f.h_e,
                    cell_points=partition.points.coords[[owner]],
                )
            )
    return partition.with_faces(new_faces)


def write_partition_vtk(partition: Partition, path, cell_data: dict | None = None) -> None:
    """Write the cells as a VTK legacy unstructured grid (ASCII).

    2D cells are written as polygons, 3D cells as convex point sets.
    ``cell_data`` maps names to per-cell scalar arrays (one value per point).
    """
    d = partition.dim
    verts: list[np.ndarray] = []
    conn: list[list[int]] = []
    for cell in partition.cells:
        base = len(verts)
        cv = cell.vertices
        verts.extend(cv)
        conn.append(list(range(base, base + len(cv))))
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("fpmheat partition\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(verts)} double\n")
        for v in verts:
            x, y = v[0], v[1]
            z = v[2] if d == 3 else 0.0
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        size = sum(len(c) + 1 for c in conn)
        f.write(f"CELLS {len(conn)} {size}\n")
        for c in conn:
            f.write(" ".join(str(v) for v in [len(c)] + c) + "\n")
        f.write(f"CELL_TYPES {len(conn)}\n")
        vtk_type = 7 if d == 2 else 41  # POLYGON / CONVEX_POINT_SET
        for _ in conn:
            f.write(f"{vtk_type}\n")
        data = dict(cell_data or {})
        data.setdefault("point_id", np.arange(partition.n))
        f.write(f"CELL_DATA {len(conn)}\n")
        for name, values in data.items():
            f.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            for v in np.asarray(values, dtype=float):
                f.write(f"{v:.17g}\n")
