"""Physical problem description: materials, boundary data, sources, references.

Material properties are coordinate-dependent evaluators (possibly piecewise
for composite media); boundary data are space- and time-dependent. All
evaluators are vectorized over point arrays and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import InvalidBoundarySpec, RootNotConverged
from .geometry import Face, FaceKind, Partition


def as_field(value):
    """Wrap a constant or callable(points) into a vectorized scalar field."""
    if callable(value):
        return lambda pts: np.asarray(value(np.atleast_2d(pts)), dtype=float)
    v = float(value)
    return lambda pts: np.full(len(np.atleast_2d(pts)), v)


def as_tensor_field(value, dim: int):
    """Wrap a constant matrix/scalar or callable(points) into a (n,d,d) field."""
    if callable(value):
        return lambda pts: np.asarray(value(np.atleast_2d(pts)), dtype=float)
    mat = np.asarray(value, dtype=float)
    if mat.ndim == 0:
        mat = mat * np.eye(dim)
    return lambda pts: np.broadcast_to(mat, (len(np.atleast_2d(pts)), dim, dim)).copy()


def as_bdata(value):
    """Wrap a constant or callable(points, t) into boundary/source data."""
    if callable(value):
        return lambda pts, t: np.asarray(value(np.atleast_2d(pts), t), dtype=float)
    v = float(value)
    return lambda pts, t: np.full(len(np.atleast_2d(pts)), v)


def heaviside(t: float) -> float:
    """Unit step switched on at time zero (1 for t >= 0)."""
    return 1.0 if t >= 0.0 else 0.0


class DirichletMode(Enum):
    STRONG = "strong"  # pin boundary-flagged points; no penalty on their faces
    PENALTY = "penalty"  # impose essential data weakly through eta2 terms


@dataclass(frozen=True)
class MaterialField:
    """Density, specific heat, and symmetric conductivity tensor fields."""

    rho: object
    c: object
    k: object
    dim: int = 2

    @classmethod
    def constant(cls, rho, c, k, dim: int = 2) -> "MaterialField":
        return cls(rho=as_field(rho), c=as_field(c), k=as_tensor_field(k, dim), dim=dim)

    @classmethod
    def from_fields(cls, rho, c, k, dim: int = 2) -> "MaterialField":
        return cls(rho=as_field(rho), c=as_field(c), k=as_tensor_field(k, dim), dim=dim)

    @classmethod
    def piecewise(cls, regions, dim: int = 2) -> "MaterialField":
        """Composite medium: ``regions`` is a list of (predicate, material).

        The first region whose predicate holds at a query point wins; the
        last region acts as the default and may use ``None`` as predicate.
        """
        mats = [(pred, mat) for pred, mat in regions]

        def pick(pts, extract):
            pts = np.atleast_2d(pts)
            out = None
            remaining = np.ones(len(pts), dtype=bool)
            for pred, mat in mats:
                mask = remaining.copy() if pred is None else (remaining & pred(pts))
                if not mask.any():
                    continue
                vals = extract(mat)(pts[mask])
                if out is None:
                    out = np.zeros((len(pts),) + vals.shape[1:])
                out[mask] = vals
                remaining &= ~mask
            if remaining.any():
                raise ValueError("piecewise material does not cover all query points")
            return out

        return cls(
            rho=lambda pts: pick(pts, lambda m: m.rho),
            c=lambda pts: pick(pts, lambda m: m.c),
            k=lambda pts: pick(pts, lambda m: m.k),
            dim=dim,
        )

    def rho_c(self, pts) -> np.ndarray:
        return self.rho(pts) * self.c(pts)

    def conductivity(self, pts) -> np.ndarray:
        return self.k(pts)

    def validate(self, sample_pts, tol: float = 1e-12) -> None:
        k = self.conductivity(sample_pts)
        asym = np.abs(k - np.swapaxes(k, 1, 2)).max()
        if asym > tol * max(1.0, np.abs(k).max()):
            raise ValueError(f"conductivity tensor is not symmetric (max asymmetry {asym:.2e})")
        eigs = np.linalg.eigvalsh(k)
        if eigs.min() <= 0:
            raise ValueError("conductivity tensor is not positive-definite at sampled points")
        if self.rho_c(sample_pts).min() <= 0:
            raise ValueError("rho * c must be positive")


@dataclass(frozen=True)
class Where:
    """Geometric selector used to attach boundary regions to faces and points."""

    face_match: object  # (centroids (n,d), normals (n,d)) -> bool (n,)
    point_match: object  # (points (n,d)) -> bool (n,)

    @classmethod
    def plane(cls, normal, offset: float, tol: float = 1e-9) -> "Where":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        scale = max(1.0, abs(offset))

        def fmatch(centroids, normals):
            on = np.abs(centroids @ n - offset) <= tol * scale
            aligned = normals @ n >= 1.0 - 1e-6
            return on & aligned

        return cls(
            face_match=fmatch,
            point_match=lambda pts: np.abs(np.atleast_2d(pts) @ n - offset) <= tol * scale,
        )

    @classmethod
    def everywhere(cls) -> "Where":
        return cls(
            face_match=lambda c, n: np.ones(len(c), dtype=bool),
            point_match=lambda pts: np.ones(len(np.atleast_2d(pts)), dtype=bool),
        )

    @classmethod
    def predicate(cls, face_fn, point_fn) -> "Where":
        return cls(face_match=face_fn, point_match=point_fn)


_REGION_KINDS = {
    "dirichlet": FaceKind.DIRICHLET,
    "neumann": FaceKind.NEUMANN,
    "robin": FaceKind.ROBIN,
    "symmetric": FaceKind.SYMMETRIC,
}


@dataclass(frozen=True)
class BoundaryRegion:
    """One named boundary region with its kind and data evaluators."""

    name: str
    kind: FaceKind
    where: Where
    value: object = None  # Dirichlet data (points, t)
    flux: object = None  # Neumann data (points, t)
    h: object = None  # Robin heat transfer coefficient (points)
    ambient: object = None  # Robin outside temperature (points, t)

    @classmethod
    def dirichlet(cls, name, where, value) -> "BoundaryRegion":
        return cls(name=name, kind=FaceKind.DIRICHLET, where=where, value=as_bdata(value))

    @classmethod
    def neumann(cls, name, where, flux=0.0) -> "BoundaryRegion":
        return cls(name=name, kind=FaceKind.NEUMANN, where=where, flux=as_bdata(flux))

    @classmethod
    def robin(cls, name, where, h, ambient) -> "BoundaryRegion":
        return cls(
            name=name, kind=FaceKind.ROBIN, where=where, h=as_field(h), ambient=as_bdata(ambient)
        )

    @classmethod
    def symmetric(cls, name, where) -> "BoundaryRegion":
        return cls(name=name, kind=FaceKind.SYMMETRIC, where=where)


@dataclass(frozen=True)
class BoundaryData:
    """Complete boundary description: every boundary face gets exactly one region."""

    regions: tuple

    def classify(self, partition: Partition) -> Partition:
        """Assign every unclassified boundary face to exactly one region."""
        faces = list(partition.faces)
        new_faces = []
        for f in faces:
            if f.kind is not FaceKind.BOUNDARY:
                new_faces.append(f)
                continue
            c = f.centroid[None, :]
            nrm = f.normal[None, :]
            hits = [
                ri for ri, r in enumerate(self.regions) if bool(r.where.face_match(c, nrm)[0])
            ]
            if len(hits) != 1:
                names = [self.regions[ri].name for ri in hits]
                raise InvalidBoundarySpec(
                    f"boundary face of cell {f.cells[0]} at {f.centroid} matches "
                    f"{len(hits)} regions {names}; need exactly one"
                )
            region = self.regions[hits[0]]
            if region.kind is FaceKind.ROBIN and float(region.h(c)[0]) < 0.0:
                raise InvalidBoundarySpec(f"Robin region {region.name} has negative h")
            new_faces.append(replace(f, kind=region.kind, region=hits[0]))
        return partition.with_faces(new_faces)

    def dirichlet_point_mask(self, points) -> tuple:
        """Boolean mask of points on any Dirichlet region and the region index per point."""
        pts = np.atleast_2d(points)
        mask = np.zeros(len(pts), dtype=bool)
        region_of = np.full(len(pts), -1, dtype=int)
        for ri, r in enumerate(self.regions):
            if r.kind is not FaceKind.DIRICHLET:
                continue
            hit = r.where.point_match(pts) & ~mask
            region_of[hit] = ri
            mask |= hit
        return mask, region_of


@dataclass(frozen=True)
class ProblemSpec:
    """Everything the assembly needs: material, boundary data, source, initial."""

    material: MaterialField
    bcs: BoundaryData
    source: object = None  # Q(points, t) or None for no heat source
    initial: object = None  # u(points) at t = 0
    dirichlet_mode: DirichletMode = DirichletMode.STRONG

    def initial_values(self, points) -> np.ndarray:
        if self.initial is None:
            return np.zeros(len(np.atleast_2d(points)))
        if callable(self.initial):
            return np.asarray(self.initial(np.atleast_2d(points)), dtype=float)
        return np.full(len(np.atleast_2d(points)), float(self.initial))


def gradation_profile(kind: str, delta: float, length: float):
    """Material gradation profile f(y) used by the graded-medium benchmarks.

    kind: 'exponential', 'exp_square', 'trigonometric', or 'power_law'.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    rel = lambda y: delta * np.asarray(y, dtype=float) / length
    profiles = {
        "exponential": lambda y: np.exp(rel(y)),
        "exp_square": lambda y: (np.exp(rel(y)) + np.exp(-rel(y))) ** 2,
        "trigonometric": lambda y: (np.cos(rel(y)) + 5.0 * np.sin(rel(y))) ** 2,
        "power_law": lambda y: (1.0 + rel(y)) ** 2,
    }
    if kind not in profiles:
        raise ValueError(f"unknown gradation profile {kind!r}")
    return profiles[kind]


def _robin_roots(m: float, n_roots: int) -> np.ndarray:
    """First n_roots positive roots of beta*tan(beta) = m, via bisection.

    Root i lives in ((i-1) pi, (i-1/2) pi); the pole-free form
    beta*sin(beta) - m*cos(beta) changes sign across each bracket.
    """
    g = lambda b: b * np.sin(b) - m * np.cos(b)
    roots = np.empty(n_roots)
    for i in range(1, n_roots + 1):
        lo = (i - 1) * np.pi
        hi = (i - 0.5) * np.pi
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            lo += 1e-14 * max(1.0, lo)
            glo = g(lo)
        if glo * ghi > 0:
            raise RootNotConverged(f"no sign change in bracket {i} for m={m}")
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if gm == 0.0:
                lo = hi = mid
                break
            if glo * gm < 0:
                hi = mid
            else:
                lo, glo = mid, gm
        roots[i - 1] = 0.5 * (lo + hi)
    return roots


_ROOT_CACHE: dict = {}


def robin_series_solution(z, t: float, L: float, m: float, k33: float, rho_c: float, n_roots: int):
    """Slab cooled/heated through a convective face: truncated series solution.

    The slab occupies [0, L] with an insulated face at z = 0 and a convective
    face at z = L whose outside temperature steps to 1 at time zero; m is the
    Biot number h*L/k33. Valid for t >= 0.
    """
    if n_roots < 1:
        raise ValueError("need at least one root")
    if m <= 0:
        raise ValueError("m must be positive")
    key = (float(m), int(n_roots))
    if key not in _ROOT_CACHE:
        _ROOT_CACHE[key] = _robin_roots(m, n_roots)
    beta = _ROOT_CACHE[key]
    z = np.asarray(z, dtype=float)
    zz = z[..., None] if z.ndim else z
    terms = (
        np.sin(beta)
        * np.cos(beta * zz / L)
        * np.exp(-(beta**2) * k33 * t / (rho_c * L**2))
        / (beta * (m + np.sin(beta) ** 2))
    )
    return 1.0 - 2.0 * m * terms.sum(axis=-1)
