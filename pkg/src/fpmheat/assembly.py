"""Assembly of the sparse symmetric semi-discrete system C u' + K u = q.

The conductivity matrix collects the per-cell diffusion term, the internal
interior-penalty flux terms, Dirichlet penalty/consistency terms, Robin
terms, and the anisotropy correction on symmetric boundaries. Local
matrices are built exactly symmetric (transposed blocks are shared bitwise)
and scattered through canonically-ordered triplets, so the assembled
operators are reproducible and K is symmetric to the last bit whenever no
anisotropic symmetric face is present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .approximation import GradientOperator, gfd_operators, shape_values
from .errors import InvalidBoundarySpec, InvalidPenalty
from .geometry import Face, FaceKind, HePolicy, Partition, face_length_scale
from .problem import DirichletMode, MaterialField, ProblemSpec
from .quadrature import QuadratureRule, build_quadrature

# Relative inward shift of face quadrature points for material evaluation,
# so piecewise materials resolve to the owning cell's side on an interface.
_OWNER_NUDGE = 1e-8


@dataclass(frozen=True)
class SparseSymmetric:
    """CSR matrix with canonical ordering; symmetric unless flagged otherwise."""

    matrix: sp.csr_matrix

    @classmethod
    def from_triplets(cls, rows, cols, vals, n: int) -> "SparseSymmetric":
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(matrix=m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def symmetry_error(self) -> float:
        diff = (self.matrix - self.matrix.T).tocoo()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def to_matrix_market(self, path) -> None:
        mmwrite(str(path), self.matrix.tocoo())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class StrongDirichlet:
    """Registry of strongly-imposed points and their boundary data in time."""

    ids: np.ndarray  # sorted point ids
    data: tuple  # per id: callable(points, t) of its region

    def values(self, coords: np.ndarray, t: float) -> np.ndarray:
        out = np.empty(len(self.ids))
        for n, (pid, fn) in enumerate(zip(self.ids, self.data)):
            out[n] = float(fn(coords[pid][None, :], t)[0])
        return out

    @property
    def empty(self) -> bool:
        return len(self.ids) == 0


@dataclass(frozen=True)
class SemiDiscreteSystem:
    """C u' + K u = q(t) plus the strong-Dirichlet registry."""

    C: SparseSymmetric
    K: SparseSymmetric
    load: object  # callable(t) -> (L,)
    dirichlet: StrongDirichlet
    L: int
    coords: np.ndarray  # generating point coordinates, for data evaluation

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.L, dtype=bool)
        mask[self.dirichlet.ids] = False
        return np.flatnonzero(mask)

    def dirichlet_values(self, t: float) -> np.ndarray:
        return self.dirichlet.values(self.coords, t)


@dataclass(frozen=True)
class ReducedSystem:
    """Strong-Dirichlet view of a steady linear system K u = q at one time."""

    free: np.ndarray
    constrained: np.ndarray
    values: np.ndarray
    matrix: sp.csr_matrix
    rhs: np.ndarray
    size: int

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.empty(self.size)
        u[self.free] = u_free
        u[self.constrained] = self.values
        return u


class _Triplets:
    def __init__(self):
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, row_ids, col_ids, local):
        r, c = np.meshgrid(row_ids, col_ids, indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(np.asarray(local, dtype=float).ravel())

    def matrix(self, n) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((n, n))
        m = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        ).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return m

    def build(self, n, symmetrize: bool = False) -> SparseSymmetric:
        m = self.matrix(n)
        if symmetrize:
            # enforce bitwise symmetry: scatter order of mirrored entries differs,
            # so plain accumulation can be off by an ulp
            m = (m + m.T).tocsr() * 0.5
            m.sort_indices()
        return SparseSymmetric(matrix=m)


def _material_at_face(material: MaterialField, qpts, owner_point):
    """Conductivity at face quadrature points, resolved to the owner side."""
    shifted = qpts + _OWNER_NUDGE * (owner_point[None, :] - qpts)
    return material.conductivity(shifted)


def strong_dirichlet_registry(partition: Partition, problem: ProblemSpec) -> StrongDirichlet:
    """Points pinned by the strong Dirichlet mode, with their data evaluators."""
    if problem.dirichlet_mode is not DirichletMode.STRONG:
        return StrongDirichlet(ids=np.array([], dtype=int), data=())
    coords = partition.points.coords
    mask, region_of = problem.bcs.dirichlet_point_mask(coords)
    mask &= partition.points.boundary_flag
    ids = np.flatnonzero(mask)
    data = tuple(problem.bcs.regions[region_of[p]].value for p in ids)
    return StrongDirichlet(ids=ids, data=data)


def assemble_capacity(
    partition: Partition,
    ops: list[GradientOperator],
    material: MaterialField,
    quad: QuadratureRule | None = None,
) -> SparseSymmetric:
    """Heat capacity matrix: per-cell mass of the trial basis weighted by rho*c."""
    quad = quad or build_quadrature(partition)
    trip = _Triplets()
    for i in range(partition.n):
        pts, w = quad.cell_points[i], quad.cell_weights[i]
        nvals = shape_values(pts, i, ops[i], partition.points)
        rc = material.rho_c(pts)
        local = np.einsum("q,qi,qj->ij", w * rc, nvals, nvals)
        trip.add(ops[i].support, ops[i].support, local)
    return trip.build(partition.n, symmetrize=True)


def _classify_requirements(partition: Partition):
    for f in partition.faces:
        if f.kind is FaceKind.BOUNDARY:
            raise InvalidBoundarySpec(
                "partition has unclassified boundary faces; apply BoundaryData.classify first"
            )


def assemble_conductivity(
    partition: Partition,
    ops: list[GradientOperator],
    problem: ProblemSpec,
    eta1: float,
    eta2: float | None = None,
    he_policy: HePolicy = HePolicy.FACE_MEASURE,
    quad: QuadratureRule | None = None,
) -> SparseSymmetric:
    """Conductivity matrix with all flux, penalty, Robin, and symmetric terms."""
    if eta1 <= 0.0:
        raise InvalidPenalty(f"eta1 must be positive, got {eta1}")
    _classify_requirements(partition)
    quad = quad or build_quadrature(partition)
    material = problem.material
    coords = partition.points.coords
    strong = strong_dirichlet_registry(partition, problem)
    strong_set = set(strong.ids.tolist())
    trip = _Triplets()
    trip_asym = _Triplets()  # symmetric-boundary correction, scattered as printed

    for i in range(partition.n):
        pts, w = quad.cell_points[i], quad.cell_weights[i]
        k_avg = np.einsum("q,qab->ab", w, material.conductivity(pts))
        local = ops[i].matrix.T @ k_avg @ ops[i].matrix
        trip.add(ops[i].support, ops[i].support, 0.5 * (local + local.T))

    for fi, f in enumerate(partition.faces):
        if f.kind in (FaceKind.NEUMANN, FaceKind.CRACK):
            continue
        pts, w = quad.face_points[fi], quad.face_weights[fi]
        if f.kind is FaceKind.INTERNAL:
            i, j = f.cells
            he = face_length_scale(f, he_policy)
            n1 = f.normal
            nv1 = shape_values(pts, i, ops[i], partition.points)
            nv2 = shape_values(pts, j, ops[j], partition.points)
            k1 = _material_at_face(material, pts, coords[i])
            k2 = _material_at_face(material, pts, coords[j])
            c1 = np.einsum("a,qab,bj->qj", n1, k1, ops[i].matrix)
            c2 = np.einsum("a,qab,bj->qj", -n1, k2, ops[j].matrix)
            pen = eta1 / he
            a11 = np.einsum("q,qi,qj->ij", w, nv1, c1)
            g11 = np.einsum("q,qi,qj->ij", w, nv1, nv1)
            trip.add(ops[i].support, ops[i].support, -0.5 * (a11 + a11.T) + pen * g11)
            a22 = np.einsum("q,qi,qj->ij", w, nv2, c2)
            g22 = np.einsum("q,qi,qj->ij", w, nv2, nv2)
            trip.add(ops[j].support, ops[j].support, -0.5 * (a22 + a22.T) + pen * g22)
            a12 = np.einsum("q,qi,qj->ij", w, nv1, c2)
            a21 = np.einsum("q,qi,qj->ij", w, nv2, c1)
            g12 = np.einsum("q,qi,qj->ij", w, nv1, nv2)
            t12 = 0.5 * (a12 + a21.T) - pen * g12
            trip.add(ops[i].support, ops[j].support, t12)
            trip.add(ops[j].support, ops[i].support, t12.T)
            continue

        owner = f.cells[0]
        nvals = shape_values(pts, owner, ops[owner], partition.points)
        kf = _material_at_face(material, pts, coords[owner])
        if f.kind is FaceKind.DIRICHLET:
            cvec = np.einsum("a,qab,bj->qj", f.normal, kf, ops[owner].matrix)
            a = np.einsum("q,qi,qj->ij", w, nvals, cvec)
            local = -(a + a.T)
            if owner not in strong_set:
                if eta2 is None or eta2 <= 0.0:
                    raise InvalidPenalty(
                        "eta2 must be positive when penalty-mode Dirichlet faces exist"
                    )
                he = face_length_scale(f, he_policy)
                local = local + (eta2 / he) * np.einsum("q,qi,qj->ij", w, nvals, nvals)
            trip.add(ops[owner].support, ops[owner].support, local)
        elif f.kind is FaceKind.ROBIN:
            region = problem.bcs.regions[f.region]
            hvals = region.h(pts)
            local = np.einsum("q,qi,qj->ij", w * hvals, nvals, nvals)
            trip.add(ops[owner].support, ops[owner].support, local)
        elif f.kind is FaceKind.SYMMETRIC:
            k11 = kf[:, 0, 0]
            kred = kf - k11[:, None, None] * np.eye(partition.dim)[None, :, :]
            cvec = np.einsum("a,qab,bj->qj", f.normal, kred, ops[owner].matrix)
            local = -np.einsum("q,qi,qj->ij", w, nvals, cvec)
            if np.abs(local).max() > 0.0:
                trip_asym.add(ops[owner].support, ops[owner].support, local)
        else:  # pragma: no cover
            raise InvalidBoundarySpec(f"unexpected face kind {f.kind}")

    sym = trip.build(partition.n, symmetrize=True).matrix
    asym = trip_asym.matrix(partition.n)
    if asym.nnz:
        total = (sym + asym).tocsr()
        total.sort_indices()
        return SparseSymmetric(matrix=total)
    return SparseSymmetric(matrix=sym)


class LoadEvaluator:
    """Time-dependent load vector q(t) with precomputed geometric factors."""

    def __init__(self, partition: Partition, ops, problem: ProblemSpec, eta2, he_policy, quad):
        self.n = partition.n
        self.terms: list[tuple] = []  # (support, static (nq, m+1), qpts, data fn)
        coords = partition.points.coords
        material = problem.material
        strong = strong_dirichlet_registry(partition, problem)
        strong_set = set(strong.ids.tolist())
        if problem.source is not None:
            from .problem import as_bdata

            src = as_bdata(problem.source)
            for i in range(partition.n):
                pts, w = quad.cell_points[i], quad.cell_weights[i]
                nvals = shape_values(pts, i, ops[i], partition.points)
                self.terms.append((ops[i].support, w[:, None] * nvals, pts, src))
        for fi, f in enumerate(partition.faces):
            if f.kind in (FaceKind.INTERNAL, FaceKind.CRACK):
                continue
            pts, w = quad.face_points[fi], quad.face_weights[fi]
            owner = f.cells[0]
            nvals = shape_values(pts, owner, ops[owner], partition.points)
            region = problem.bcs.regions[f.region]
            if f.kind is FaceKind.DIRICHLET:
                kf = _material_at_face(material, pts, coords[owner])
                cvec = np.einsum("a,qab,bj->qj", f.normal, kf, ops[owner].matrix)
                static = -cvec
                if owner not in strong_set:
                    if eta2 is None or eta2 <= 0.0:
                        raise InvalidPenalty(
                            "eta2 must be positive when penalty-mode Dirichlet faces exist"
                        )
                    he = face_length_scale(f, he_policy)
                    static = static + (eta2 / he) * nvals
                self.terms.append((ops[owner].support, w[:, None] * static, pts, region.value))
            elif f.kind is FaceKind.NEUMANN:
                self.terms.append((ops[owner].support, w[:, None] * nvals, pts, region.flux))
            elif f.kind is FaceKind.ROBIN:
                hvals = region.h(pts)
                self.terms.append(
                    (ops[owner].support, (w * hvals)[:, None] * nvals, pts, region.ambient)
                )
            elif f.kind is FaceKind.SYMMETRIC:
                continue

    def __call__(self, t: float) -> np.ndarray:
        q = np.zeros(self.n)
        for support, static, pts, data in self.terms:
            q[support] += static.T @ data(pts, t)
        return q


def assemble_load(
    partition: Partition,
    ops,
    problem: ProblemSpec,
    eta2: float | None,
    t: float,
    he_policy: HePolicy = HePolicy.FACE_MEASURE,
    quad: QuadratureRule | None = None,
) -> np.ndarray:
    """One-shot load vector at time t."""
    quad = quad or build_quadrature(partition)
    _classify_requirements(partition)
    return LoadEvaluator(partition, ops, problem, eta2, he_policy, quad)(t)


def assemble_system(
    partition: Partition,
    problem: ProblemSpec,
    eta1: float,
    eta2: float | None = None,
    he_policy: HePolicy = HePolicy.FACE_MEASURE,
    ops: list | None = None,
    quad: QuadratureRule | None = None,
) -> SemiDiscreteSystem:
    """Classify boundaries if needed and assemble the full semi-discrete system."""
    if any(f.kind is FaceKind.BOUNDARY for f in partition.faces):
        partition = problem.bcs.classify(partition)
    ops = ops or gfd_operators(partition, partition.points)
    quad = quad or build_quadrature(partition)
    cap = assemble_capacity(partition, ops, problem.material, quad)
    cond = assemble_conductivity(partition, ops, problem, eta1, eta2, he_policy, quad)
    load = LoadEvaluator(partition, ops, problem, eta2, he_policy, quad)
    strong = strong_dirichlet_registry(partition, problem)
    return SemiDiscreteSystem(
        C=cap,
        K=cond,
        load=load,
        dirichlet=strong,
        L=partition.n,
        coords=partition.points.coords,
    )


def impose_strong_dirichlet(system: SemiDiscreteSystem, t: float) -> ReducedSystem:
    """Reduced steady view of K u = q(t) with pinned values moved to the rhs."""
    ids = system.dirichlet.ids
    mask = np.ones(system.L, dtype=bool)
    mask[ids] = False
    free = np.flatnonzero(mask)
    k = system.K.matrix
    rhs_full = np.asarray(system.load(t))
    vals = system.dirichlet_values(t)
    k_ff = k[free][:, free].tocsr()
    if len(ids):
        rhs = rhs_full[free] - k[free][:, ids] @ vals
    else:
        rhs = rhs_full[free]
    return ReducedSystem(
        free=free, constrained=ids, values=vals, matrix=k_ff, rhs=rhs, size=system.L
    )
