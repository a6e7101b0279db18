"""Benchmark registry, error norms, and independent reference solutions.

Every registered case rebuilds one of the desk-scale verification problems:
2D disk/square transients with closed-form solutions, graded-square
transients checked against a dense 1D Crank-Nicolson oracle, a cracked
composite square, and 3D cube problems (anisotropic steady state, thermal
shock, Robin convection). References are independent of the solver path:
closed forms, eigenfunction series, or dense finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .approximation import gfd_operators, shape_values
from .assembly import assemble_system
from .errors import ZeroNormReference
from .geometry import (
    ConvexDomain,
    CrackSpec,
    FaceKind,
    HePolicy,
    Partition,
    PointCloud,
    build_partition,
    apply_crack,
)
from .problem import (
    BoundaryData,
    BoundaryRegion,
    DirichletMode,
    MaterialField,
    ProblemSpec,
    Where,
    gradation_profile,
    heaviside,
    robin_series_solution,
)
from .quadrature import build_quadrature
from .timeint import BackwardEuler, ForwardEuler, Lvim, LvimConfig, Trajectory, march, solve_steady


# ---------------------------------------------------------------------------
# error norms


def error_norms(
    u_nodal: np.ndarray,
    exact,
    partition: Partition,
    ops,
    t: float = 0.0,
    gradient=None,
    quad=None,
):
    """Relative L2 errors of the nodal field against a reference evaluator.

    The field is interpolated with the per-cell shape rows, its gradient is
    the per-cell constant; integration reuses the assembly quadrature.
    Returns (r0, r1); r1 is None when no reference gradient is supplied.
    Raises ZeroNormReference when a reference norm vanishes.
    """
    quad = quad or build_quadrature(partition)
    num0 = den0 = 0.0
    num1 = den1 = 0.0
    for i in range(partition.n):
        pts, w = quad.cell_points[i], quad.cell_weights[i]
        nvals = shape_values(pts, i, ops[i], partition.points)
        uh = nvals @ u_nodal[ops[i].support]
        ue = np.asarray(exact(pts, t), dtype=float)
        num0 += float(w @ (uh - ue) ** 2)
        den0 += float(w @ ue**2)
        if gradient is not None:
            gh = ops[i].matrix @ u_nodal[ops[i].support]  # constant per cell
            ge = np.asarray(gradient(pts, t), dtype=float)
            diff = ge - gh[None, :]
            num1 += float(w @ (diff**2).sum(axis=1))
            den1 += float(w @ (ge**2).sum(axis=1))
    if den0 <= 0.0:
        raise ZeroNormReference("reference field has zero L2 norm")
    r0 = float(np.sqrt(num0 / den0))
    if gradient is None:
        return r0, None
    if den1 <= 0.0:
        raise ZeroNormReference("reference gradient has zero L2 norm")
    return r0, float(np.sqrt(num1 / den1))


def average_r0(
    trajectory: Trajectory, exact, partition: Partition, ops, quad=None, window=None
) -> float:
    """Mean of r0 over the recorded times (t > 0, optionally windowed)."""
    quad = quad or build_quadrature(partition)
    lo, hi = window if window is not None else (0.0, np.inf)
    vals = []
    for t, u in zip(trajectory.times, trajectory.values):
        if t <= 0.0 or t < lo or t > hi:
            continue
        r0, _ = error_norms(u, exact, partition, ops, t=t, quad=quad)
        vals.append(r0)
    if not vals:
        raise ValueError("no recorded times inside the averaging window")
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# independent reference solutions


def heat1d_crank_nicolson(
    conductivity,
    capacity,
    u_bottom: float,
    u_top: float,
    length: float,
    times,
    initial: float | None = None,
    n_nodes: int = 401,
    dt: float = 1e-5,
):
    """Dense 1D finite-difference oracle for (capacity) u_t = (conductivity u_y)_y.

    Crank-Nicolson in time on a uniform grid with Dirichlet ends; returns
    (grid, snapshots) where snapshots[t] is the nodal solution nearest to
    each requested time. Used as the transient reference for the graded
    square family, independent of the meshless solver.
    """
    times = sorted(float(t) for t in times)
    y = np.linspace(0.0, length, n_nodes)
    h = y[1] - y[0]
    kmid = np.asarray(conductivity(0.5 * (y[:-1] + y[1:])), dtype=float)
    cap = np.asarray(capacity(y), dtype=float)

    # interior tridiagonal of (1/cap) d/dy (k d/dy)
    lower = kmid[:-1] / (h * h * cap[1:-1])
    upper = kmid[1:] / (h * h * cap[1:-1])
    diag = -(kmid[:-1] + kmid[1:]) / (h * h * cap[1:-1])

    # banded matrices for (I -/+ dt/2 A) with pinned end rows
    def banded(sign):
        ab = np.zeros((3, n_nodes))
        ab[1, 0] = ab[1, -1] = 1.0
        ab[1, 1:-1] = 1.0 + sign * 0.5 * dt * (-diag)
        ab[0, 2:] = -sign * 0.5 * dt * upper
        ab[2, :-2] = -sign * 0.5 * dt * lower
        return ab

    ab_impl = banded(+1.0)

    u = np.full(n_nodes, u_bottom if initial is None else initial, dtype=float)
    snapshots: dict[float, np.ndarray] = {}
    n_steps = int(round(times[-1] / dt))
    want = {int(round(t / dt)): t for t in times}
    if 0 in want:
        snapshots[want[0]] = u.copy()
    rhs = np.empty(n_nodes)
    for step in range(1, n_steps + 1):
        rhs[0], rhs[-1] = u_bottom, u_top
        au = np.empty(n_nodes - 2)
        au[:] = diag * u[1:-1]
        au += lower * u[:-2]
        au += upper * u[2:]
        rhs[1:-1] = u[1:-1] + 0.5 * dt * au
        u = solve_banded((1, 1), ab_impl, rhs)
        if step in want:
            snapshots[want[step]] = u.copy()
    return y, snapshots


@dataclass(frozen=True)
class Reference:
    """Reference field: value(points, t) and optional gradient(points, t)."""

    value: object
    gradient: object = None


def oracle_reference_1d(profile, k22: float, u_bottom, u_top, length, times, axis: int = 1):
    """Reference built from the 1D Crank-Nicolson oracle, read along one axis."""
    grid, snaps = heat1d_crank_nicolson(
        conductivity=lambda y: k22 * profile(y),
        capacity=profile,
        u_bottom=u_bottom,
        u_top=u_top,
        length=length,
        times=times,
    )
    keys = np.array(sorted(snaps))

    def value(pts, t):
        idx = int(np.argmin(np.abs(keys - t)))
        if abs(keys[idx] - t) > 1e-6 * max(1.0, abs(t)):
            raise KeyError(f"oracle has no snapshot near t={t}")
        return np.interp(np.atleast_2d(pts)[:, axis], grid, snaps[float(keys[idx])])

    return Reference(value=value)


def steady_graded_reference(profile, u_bottom, u_top, length, axis: int = 1, k22: float = 1.0):
    """Closed-form steady state of (k22 f(y) u')' = 0 with Dirichlet ends."""
    yy = np.linspace(0.0, length, 200001)
    inv = 1.0 / np.asarray(profile(yy), dtype=float)
    g = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(yy))])
    g_total = g[-1]

    def value(pts, t=0.0):
        y = np.atleast_2d(pts)[:, axis]
        return u_bottom + (u_top - u_bottom) * np.interp(y, yy, g) / g_total

    def gradient(pts, t=0.0):
        pts = np.atleast_2d(pts)
        y = pts[:, axis]
        out = np.zeros_like(pts)
        out[:, axis] = (u_top - u_bottom) / (np.asarray(profile(y)) * g_total)
        return out

    return Reference(value=value, gradient=gradient)


def fixed_ends_shock_reference(length: float, diffusivity: float, axis: int = 2, n_terms: int = 200):
    """Slab with ends pinned to 0 and 1 (switched on at t=0), zero initial state."""

    def series(z, t):
        n = np.arange(1, n_terms + 1)
        decay = np.exp(-(n**2) * np.pi**2 * diffusivity * t / length**2)
        terms = ((-1.0) ** (n + 1) / n) * np.sin(np.outer(z, n) * np.pi / length) * decay
        return z / length - (2.0 / np.pi) * terms.sum(axis=1)

    def value(pts, t):
        z = np.atleast_2d(pts)[:, axis]
        if t <= 0.0:
            return np.zeros(len(z))
        return series(z, t)

    def gradient(pts, t):
        pts = np.atleast_2d(pts)
        z = pts[:, axis]
        out = np.zeros_like(pts)
        if t <= 0.0:
            return out
        n = np.arange(1, n_terms + 1)
        decay = np.exp(-(n**2) * np.pi**2 * diffusivity * t / length**2)
        terms = ((-1.0) ** (n + 1)) * np.cos(np.outer(z, n) * np.pi / length) * decay
        out[:, axis] = 1.0 / length - (2.0 / length) * terms.sum(axis=1)
        return out

    return Reference(value=value, gradient=gradient)


def robin_slab_reference(length: float, biot: float, k33: float, rho_c: float, n_roots: int = 50):
    """Convective-face slab series, read along z (insulated z=0, Robin z=L)."""

    def value(pts, t):
        z = np.atleast_2d(pts)[:, 2]
        if t <= 0.0:
            return np.zeros(len(z))
        return robin_series_solution(z, t, length, biot, k33, rho_c, n_roots)

    return Reference(value=value)


# ---------------------------------------------------------------------------
# point layouts


def grid_cloud(lo, hi, counts, include_boundary: bool) -> PointCloud:
    """Uniform tensor grid; either including the boundary or cell-centered."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = []
    for a, b, n in zip(lo, hi, counts):
        if include_boundary:
            axes.append(np.linspace(a, b, n))
        else:
            axes.append(a + (np.arange(n) + 0.5) * (b - a) / n)
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh])
    if include_boundary:
        on = np.zeros(len(coords), dtype=bool)
        for ax in range(len(lo)):
            on |= np.isclose(coords[:, ax], lo[ax]) | np.isclose(coords[:, ax], hi[ax])
    else:
        on = np.zeros(len(coords), dtype=bool)
    return PointCloud(coords=coords, boundary_flag=on)


def random_rect_cloud(lo, hi, n_interior: int, per_side: int, seed: int, margin: float = 0.04):
    """Seeded random 2D layout: corners + random side points + random interior."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = hi - lo
    pts = [
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ]
    for side in range(4):
        s = lo[0] + span[0] * np.sort(rng.uniform(0.06, 0.94, per_side))
        t = lo[1] + span[1] * np.sort(rng.uniform(0.06, 0.94, per_side))
        pts += {
            0: [[v, lo[1]] for v in s],
            1: [[hi[0], v] for v in t],
            2: [[v, hi[1]] for v in s],
            3: [[lo[0], v] for v in t],
        }[side]
    n_boundary = len(pts)
    target = n_boundary + n_interior
    coords = np.array(pts)
    min_gap = 0.25 * np.sqrt(span.prod() / target)
    while len(coords) < target:
        cand = lo + span * (margin + (1 - 2 * margin) * rng.uniform(size=2))
        if np.linalg.norm(coords - cand, axis=1).min() > min_gap:
            coords = np.vstack([coords, cand])
    flags = np.zeros(len(coords), dtype=bool)
    flags[:n_boundary] = True
    return PointCloud(coords=coords, boundary_flag=flags)


def disk_layout_601(n_boundary: int = 30, seed: int | None = None):
    """Disk discretized by a polygon through ``n_boundary`` rim points and
    concentric interior rings of near-uniform density (601 points total).

    With ``seed`` set, the interior points are randomized inside the polygon
    instead (same totals)."""
    theta = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
    rim = np.column_stack([np.cos(theta), np.sin(theta)])
    domain = ConvexDomain.from_polygon(rim)
    if seed is None:
        # rings stop short of the rim so the 30 coarse rim cells own the whole
        # boundary (keeps the essential data purely strongly imposed)
        rings = 13
        r_max = 0.87
        counts = [int(round(570 * i / sum(range(1, rings + 1)))) for i in range(1, rings + 1)]
        counts[-1] += 570 - sum(counts)
        interior = [np.zeros((1, 2))]
        for ring, cnt in enumerate(counts, start=1):
            r = r_max * ring / rings
            ang = 2.0 * np.pi * (np.arange(cnt) + 0.5 * (ring % 2)) / cnt
            interior.append(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
        inner = np.vstack(interior)
    else:
        rng = np.random.default_rng(seed)
        inner = np.zeros((0, 2))
        min_gap = 0.018
        while len(inner) < 571:
            cand = rng.uniform(-1.0, 1.0, 2)
            if np.linalg.norm(cand) > 0.96:
                continue
            if len(inner) and np.linalg.norm(inner - cand, axis=1).min() < min_gap:
                continue
            inner = np.vstack([inner, cand]) if len(inner) else cand[None, :]
    coords = np.vstack([rim, inner])
    flags = np.zeros(len(coords), dtype=bool)
    flags[:n_boundary] = True
    return PointCloud(coords=coords, boundary_flag=flags), domain


# ---------------------------------------------------------------------------
# benchmark cases


@dataclass(frozen=True)
class CaseSetup:
    """A fully-specified benchmark run."""

    id: str
    partition: Partition
    problem: ProblemSpec
    eta1: float
    eta2: float | None = None
    he_policy: HePolicy = HePolicy.FACE_MEASURE
    scheme: str = "lvim"  # lvim | backward_euler | forward_euler | steady
    lvim: LvimConfig = field(default_factory=LvimConfig)
    dt: float | None = None
    t_final: float | None = None
    reference: object = None  # Reference or callable(times) -> Reference
    window: tuple | None = None
    config: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ErrorReport:
    """Outcome of one benchmark run."""

    id: str
    r0: float | None
    r1: float | None
    r0_bar: float | None
    wall_time_s: float
    assemble_time_s: float
    solve_time_s: float
    config: dict
    iterations: tuple = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "r0": self.r0,
            "r1": self.r1,
            "r0_bar": self.r0_bar,
            "wall_time_s": self.wall_time_s,
            "assemble_time_s": self.assemble_time_s,
            "solve_time_s": self.solve_time_s,
            "iterations": list(self.iterations),
            "config": self.config,
        }


@dataclass(frozen=True)
class RunResult:
    case: CaseSetup
    system: object
    ops: list
    quad: object
    trajectory: Trajectory | None
    final: np.ndarray
    report: ErrorReport


def run_case(case: CaseSetup) -> RunResult:
    """Assemble, march (or solve steady), and evaluate a prepared case."""
    t0 = time.perf_counter()
    partition = case.partition
    if any(f.kind is FaceKind.BOUNDARY for f in partition.faces):
        partition = case.problem.bcs.classify(partition)
    ops = gfd_operators(partition, partition.points)
    quad = build_quadrature(partition)
    system = assemble_system(
        partition, case.problem, case.eta1, case.eta2, case.he_policy, ops=ops, quad=quad
    )
    t1 = time.perf_counter()

    trajectory = None
    if case.scheme == "steady":
        final = solve_steady(system, t=0.0)
    else:
        u0 = case.problem.initial_values(partition.points.coords)
        scheme = {
            "lvim": Lvim(case.lvim),
            "backward_euler": BackwardEuler(),
            "forward_euler": ForwardEuler(),
        }[case.scheme]
        trajectory = march(system, u0, scheme, dt=case.dt, t_final=case.t_final)
        final = trajectory.values[-1]
    t2 = time.perf_counter()

    r0 = r1 = r0_bar = None
    ref = case.reference
    if ref is not None:
        if callable(ref) and not isinstance(ref, Reference):
            ref = ref(trajectory.times if trajectory is not None else np.array([0.0]))
        t_eval = case.t_final if trajectory is not None else 0.0
        r0, r1 = error_norms(
            final, ref.value, partition, ops, t=t_eval, gradient=ref.gradient, quad=quad
        )
        if trajectory is not None and case.window is not None:
            r0_bar = average_r0(trajectory, ref.value, partition, ops, quad=quad, window=case.window)
    t3 = time.perf_counter()

    report = ErrorReport(
        id=case.id,
        r0=r0,
        r1=r1,
        r0_bar=r0_bar,
        wall_time_s=t3 - t0,
        assemble_time_s=t1 - t0,
        solve_time_s=t2 - t1,
        config=dict(case.config),
        iterations=trajectory.iterations if trajectory is not None else (),
    )
    return RunResult(
        case=replace(case, partition=partition),
        system=system,
        ops=ops,
        quad=quad,
        trajectory=trajectory,
        final=final,
        report=report,
    )


def _check_overrides(overrides, allowed):
    unknown = set(overrides) - set(allowed)
    if unknown:
        raise KeyError(f"unknown overrides {sorted(unknown)}; allowed: {sorted(allowed)}")


def _merge(defaults: dict, overrides: dict) -> dict:
    _check_overrides(overrides, defaults)
    cfg = dict(defaults)
    cfg.update(overrides)
    return cfg


def _scheme_fields(cfg):
    lvim = LvimConfig(nodes=int(cfg["nodes"]), tol=float(cfg["tol"]))
    return {
        "scheme": cfg["scheme"],
        "lvim": lvim,
        "dt": cfg["dt"],
        "t_final": cfg["t_final"],
        "eta1": cfg["eta1"],
        "eta2": cfg.get("eta2"),
    }


def _case_ex1_1(overrides) -> CaseSetup:
    cfg = _merge(
        dict(
            variant="uniform",
            seed=11,
            eta1=2.0,
            eta2=None,
            nodes=5,
            tol=1e-8,
            dt=0.4,
            t_final=0.8,
            scheme="lvim",
        ),
        overrides,
    )
    cloud, domain = disk_layout_601(seed=None if cfg["variant"] == "uniform" else cfg["seed"])
    partition = build_partition(cloud, domain)

    def value(pts, t):
        pts = np.atleast_2d(pts)
        s = pts[:, 0] + pts[:, 1]
        return np.exp(s) * np.cos(s + 4.0 * t)

    def gradient(pts, t):
        pts = np.atleast_2d(pts)
        s = pts[:, 0] + pts[:, 1]
        g = np.exp(s) * (np.cos(s + 4.0 * t) - np.sin(s + 4.0 * t))
        return np.column_stack([g, g])

    bcs = BoundaryData(
        regions=(BoundaryRegion.dirichlet("rim", Where.everywhere(), lambda p, t: value(p, t)),)
    )
    problem = ProblemSpec(
        material=MaterialField.constant(1.0, 1.0, np.eye(2)),
        bcs=bcs,
        initial=lambda pts: value(pts, 0.0),
        dirichlet_mode=DirichletMode.STRONG,
    )
    return CaseSetup(
        id="Ex1_1",
        partition=partition,
        problem=problem,
        reference=Reference(value=value, gradient=gradient),
        window=(0.0, cfg["t_final"]),
        config=cfg,
        **_scheme_fields(cfg),
    )


def _case_ex1_2(overrides) -> CaseSetup:
    cfg = _merge(
        dict(
            variant="uniform",
            seed=7,
            n=12,
            eta1=2.0,
            eta2=None,
            nodes=5,
            tol=1e-8,
            dt=0.5,
            t_final=1.0,
            scheme="lvim",
        ),
        overrides,
    )
    if cfg["variant"] == "uniform":
        cloud = grid_cloud([0, 0], [1, 1], [cfg["n"], cfg["n"]], include_boundary=True)
    else:
        cloud = random_rect_cloud([0, 0], [1, 1], n_interior=100, per_side=10, seed=cfg["seed"])
    domain = ConvexDomain.from_box([0, 0], [1, 1])
    partition = build_partition(cloud, domain)

    def value(pts, t):
        pts = np.atleast_2d(pts)
        damp = np.sqrt(2.0) * np.exp(-np.pi**2 * t / 4.0)
        return damp * (
            np.cos(0.5 * np.pi * pts[:, 0] - 0.25 * np.pi)
            + np.cos(0.5 * np.pi * pts[:, 1] - 0.25 * np.pi)
        )

    def gradient(pts, t):
        pts = np.atleast_2d(pts)
        damp = np.sqrt(2.0) * np.exp(-np.pi**2 * t / 4.0) * 0.5 * np.pi
        return np.column_stack(
            [
                -damp * np.sin(0.5 * np.pi * pts[:, 0] - 0.25 * np.pi),
                -damp * np.sin(0.5 * np.pi * pts[:, 1] - 0.25 * np.pi),
            ]
        )

    bcs = BoundaryData(
        regions=(
            BoundaryRegion.neumann(
                "right", Where.plane([1, 0], 1.0), lambda p, t: gradient(p, t)[:, 0]
            ),
            BoundaryRegion.dirichlet("left", Where.plane([-1, 0], 0.0), lambda p, t: value(p, t)),
            BoundaryRegion.dirichlet("bottom", Where.plane([0, -1], 0.0), lambda p, t: value(p, t)),
            BoundaryRegion.dirichlet("top", Where.plane([0, 1], 1.0), lambda p, t: value(p, t)),
        )
    )
    problem = ProblemSpec(
        material=MaterialField.constant(1.0, 1.0, np.eye(2)),
        bcs=bcs,
        initial=lambda pts: value(pts, 0.0),
        dirichlet_mode=DirichletMode.STRONG,
    )
    return CaseSetup(
        id="Ex1_2",
        partition=partition,
        problem=problem,
        reference=Reference(value=value, gradient=gradient),
        window=(0.0, cfg["t_final"]),
        config=cfg,
        **_scheme_fields(cfg),
    )


_GRADED_VARIANTS = {
    "hom_iso": dict(delta=0.0, k_hat=((1.0, 0.0), (0.0, 1.0))),
    "fgm_iso": dict(k_hat=((1.0, 0.0), (0.0, 1.0))),
    "fgm_aniso": dict(k_hat=((2.0, 1.0), (1.0, 2.0))),
}


def _graded_square_case(case_id, profile_kind, default_delta, u_bottom, u_top, overrides):
    cfg = _merge(
        dict(
            variant="fgm_aniso",
            n=11,
            eta1=10.0,
            eta2=None,
            nodes=5,
            tol=1e-8,
            dt=0.1,
            t_final=0.8,
            scheme="lvim",
            lateral="symmetric",
        ),
        overrides,
    )
    var = _GRADED_VARIANTS[cfg["variant"]]
    delta = var.get("delta", default_delta)
    k_hat = np.array(var["k_hat"])
    profile = gradation_profile(profile_kind, delta, 1.0)
    cloud = grid_cloud([0, 0], [1, 1], [cfg["n"], cfg["n"]], include_boundary=True)
    domain = ConvexDomain.from_box([0, 0], [1, 1])
    partition = build_partition(cloud, domain)

    def k_field(pts):
        return profile(np.atleast_2d(pts)[:, 1])[:, None, None] * k_hat[None, :, :]

    material = MaterialField.from_fields(
        rho=1.0, c=lambda pts: profile(np.atleast_2d(pts)[:, 1]), k=k_field, dim=2
    )
    lateral_kind = (
        BoundaryRegion.symmetric if cfg["lateral"] == "symmetric" else BoundaryRegion.neumann
    )
    bcs = BoundaryData(
        regions=(
            BoundaryRegion.dirichlet("bottom", Where.plane([0, -1], 0.0), u_bottom),
            BoundaryRegion.dirichlet("top", Where.plane([0, 1], 1.0), u_top),
            lateral_kind("left", Where.plane([-1, 0], 0.0)),
            lateral_kind("right", Where.plane([1, 0], 1.0)),
        )
    )
    problem = ProblemSpec(
        material=material, bcs=bcs, initial=float(u_bottom), dirichlet_mode=DirichletMode.STRONG
    )
    if cfg["scheme"] == "steady":
        reference = steady_graded_reference(profile, u_bottom, u_top, 1.0, k22=k_hat[1, 1])
    else:
        reference = lambda times: oracle_reference_1d(
            profile, k_hat[1, 1], u_bottom, u_top, 1.0, times[times > 0.0]
        )
    return CaseSetup(
        id=case_id,
        partition=partition,
        problem=problem,
        reference=reference,
        window=(0.0, cfg["t_final"] if cfg["t_final"] else 0.8),
        config=cfg,
        **_scheme_fields(cfg),
    )


def _case_ex1_7(overrides) -> CaseSetup:
    k_top, k_bottom = 2.0, 1.0
    scale = float(np.sqrt(k_top * k_bottom))
    cfg = _merge(
        dict(
            n=10,
            eta1=5.0 * scale,
            eta2=20.0 * scale,
            nodes=5,
            tol=1e-8,
            dt=None,
            t_final=None,
            scheme="steady",
            crack=True,
        ),
        overrides,
    )
    side = 100.0
    cloud = grid_cloud([0, 0], [side, side], [cfg["n"], cfg["n"]], include_boundary=False)
    domain = ConvexDomain.from_box([0, 0], [side, side])
    partition = build_partition(cloud, domain)
    if cfg["crack"]:
        partition = apply_crack(
            partition, CrackSpec.from_segment([25.0, 50.0], [75.0, 50.0])
        )
    material = MaterialField.piecewise(
        [
            (lambda pts: np.atleast_2d(pts)[:, 1] > 50.0, MaterialField.constant(1.0, 1.0, k_top * np.eye(2))),
            (None, MaterialField.constant(1.0, 1.0, k_bottom * np.eye(2))),
        ],
        dim=2,
    )
    bcs = BoundaryData(
        regions=(
            BoundaryRegion.dirichlet("top", Where.plane([0, 1], side), 100.0),
            BoundaryRegion.dirichlet("bottom", Where.plane([0, -1], 0.0), 0.0),
            BoundaryRegion.dirichlet("left", Where.plane([-1, 0], 0.0), 0.0),
            BoundaryRegion.dirichlet("right", Where.plane([1, 0], side), 0.0),
        )
    )
    problem = ProblemSpec(
        material=material, bcs=bcs, initial=0.0, dirichlet_mode=DirichletMode.PENALTY
    )
    return CaseSetup(
        id="Ex1_7",
        partition=partition,
        problem=problem,
        reference=None,
        config=cfg,
        **_scheme_fields(cfg),
    )


def _case_ex2_1(overrides) -> CaseSetup:
    cfg = _merge(
        dict(
            n=10,
            eta1=5e-4,
            eta2=None,
            nodes=5,
            tol=1e-8,
            dt=None,
            t_final=None,
            scheme="steady",
        ),
        overrides,
    )
    cloud = grid_cloud([0, 0, 0], [1, 1, 1], [cfg["n"]] * 3, include_boundary=True)
    domain = ConvexDomain.from_box([0, 0, 0], [1, 1, 1])
    partition = build_partition(cloud, domain)
    k = 1e-4 * np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.2], [0.0, 0.2, 1.0]])

    def value(pts, t=0.0):
        x, y, z = np.atleast_2d(pts).T
        return y**2 + y - 5.0 * y * z + x * z

    def gradient(pts, t=0.0):
        x, y, z = np.atleast_2d(pts).T
        return np.column_stack([z, 2.0 * y + 1.0 - 5.0 * z, -5.0 * y + x])

    bcs = BoundaryData(
        regions=(BoundaryRegion.dirichlet("walls", Where.everywhere(), lambda p, t: value(p)),)
    )
    problem = ProblemSpec(
        material=MaterialField.constant(1.0, 1.0, k, dim=3),
        bcs=bcs,
        dirichlet_mode=DirichletMode.STRONG,
    )
    return CaseSetup(
        id="Ex2_1",
        partition=partition,
        problem=problem,
        reference=Reference(value=value, gradient=gradient),
        config=cfg,
        **_scheme_fields(cfg),
    )


def _shock_cube_case(case_id, k_tensor, lateral, cfg):
    """Cube with a unit thermal shock on top, zero bottom, lateral closure."""
    side = 10.0
    cloud = grid_cloud([0, 0, 0], [side] * 3, [cfg["n"]] * 3, include_boundary=False)
    domain = ConvexDomain.from_box([0, 0, 0], [side] * 3)
    partition = build_partition(cloud, domain)
    shock = lambda p, t: np.full(len(np.atleast_2d(p)), heaviside(t))
    regions = [
        BoundaryRegion.dirichlet("top", Where.plane([0, 0, 1], side), shock),
        BoundaryRegion.dirichlet("bottom", Where.plane([0, 0, -1], 0.0), 0.0),
    ]
    if lateral == "symmetric_x":
        regions += [
            BoundaryRegion.symmetric("left", Where.plane([-1, 0, 0], 0.0)),
            BoundaryRegion.symmetric("right", Where.plane([1, 0, 0], side)),
            BoundaryRegion.neumann("front", Where.plane([0, -1, 0], 0.0)),
            BoundaryRegion.neumann("back", Where.plane([0, 1, 0], side)),
        ]
    else:
        regions += [
            BoundaryRegion.neumann("left", Where.plane([-1, 0, 0], 0.0)),
            BoundaryRegion.neumann("right", Where.plane([1, 0, 0], side)),
            BoundaryRegion.neumann("front", Where.plane([0, -1, 0], 0.0)),
            BoundaryRegion.neumann("back", Where.plane([0, 1, 0], side)),
        ]
    if callable(k_tensor):
        material = MaterialField.from_fields(1.0, 1.0, k_tensor, dim=3)
    else:
        material = MaterialField.constant(1.0, 1.0, k_tensor, dim=3)
    problem = ProblemSpec(
        material=material,
        bcs=BoundaryData(regions=tuple(regions)),
        initial=0.0,
        dirichlet_mode=DirichletMode.PENALTY,
    )
    return partition, problem


def _case_ex2_2(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=10, eta1=10.0, eta2=20.0, nodes=3, tol=1e-8, dt=5.5, t_final=55.0, scheme="lvim"),
        overrides,
    )
    partition, problem = _shock_cube_case("Ex2_2", np.eye(3), "neumann", cfg)
    return CaseSetup(
        id="Ex2_2",
        partition=partition,
        problem=problem,
        reference=fixed_ends_shock_reference(10.0, 1.0),
        window=(0.0, cfg["t_final"]),
        config=cfg,
        **_scheme_fields(cfg),
    )


def _case_ex2_3(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=10, eta1=10.0, eta2=20.0, nodes=4, tol=1e-6, dt=25.0, t_final=250.0, scheme="lvim"),
        overrides,
    )
    k = np.array([[1.0, 0.0, 0.0], [0.0, 1.5, 0.5], [0.0, 0.5, 1.0]])
    partition, problem = _shock_cube_case("Ex2_3", k, "symmetric_x", cfg)
    return CaseSetup(
        id="Ex2_3", partition=partition, problem=problem, config=cfg, **_scheme_fields(cfg)
    )


def _case_ex2_4(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=11, eta1=10.0, eta2=20.0, nodes=4, tol=1e-6, dt=25.0, t_final=250.0, scheme="lvim"),
        overrides,
    )

    def k_field(pts):
        pts = np.atleast_2d(pts)
        k = np.tile(
            np.array([[1.0, 0.0, 0.0], [0.0, 1.5, 0.5], [0.0, 0.5, 1.0]]), (len(pts), 1, 1)
        )
        k[:, 2, 2] = 1.0 + pts[:, 2] / 10.0
        return k

    partition, problem = _shock_cube_case("Ex2_4", k_field, "symmetric_x", cfg)
    return CaseSetup(
        id="Ex2_4", partition=partition, problem=problem, config=cfg, **_scheme_fields(cfg)
    )


def _case_ex2_5(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=10, eta1=5.0, eta2=10.0, nodes=5, tol=1e-6, dt=25.0, t_final=250.0, scheme="lvim"),
        overrides,
    )
    k = np.array([[1.0, 0.5, 0.5], [0.5, 1.5, 0.5], [0.5, 0.5, 1.0]])
    partition, problem = _shock_cube_case("Ex2_5", k, "neumann", cfg)
    return CaseSetup(
        id="Ex2_5", partition=partition, problem=problem, config=cfg, **_scheme_fields(cfg)
    )


def _case_ex2_6(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=10, eta1=5.0, eta2=10.0, nodes=5, tol=1e-6, dt=None, t_final=None, scheme="steady"),
        overrides,
    )

    def k_field(pts):
        pts = np.atleast_2d(pts)
        k = np.tile(
            np.array([[1.0, 0.5, 0.5], [0.5, 1.5, 0.5], [0.5, 0.5, 1.0]]), (len(pts), 1, 1)
        )
        k[:, 2, 2] = 1.0 + pts[:, 2] / 10.0
        return k

    partition, problem = _shock_cube_case("Ex2_6", k_field, "neumann", cfg)
    return CaseSetup(
        id="Ex2_6", partition=partition, problem=problem, config=cfg, **_scheme_fields(cfg)
    )


def _case_ex2_7(overrides) -> CaseSetup:
    cfg = _merge(
        dict(n=10, eta1=10.0, eta2=None, nodes=5, tol=1e-8, dt=5.0, t_final=50.0, scheme="lvim"),
        overrides,
    )
    side = 10.0
    cloud = grid_cloud([0, 0, 0], [side] * 3, [cfg["n"]] * 3, include_boundary=False)
    domain = ConvexDomain.from_box([0, 0, 0], [side] * 3)
    partition = build_partition(cloud, domain)
    ambient = lambda p, t: np.full(len(np.atleast_2d(p)), heaviside(t))
    regions = (
        BoundaryRegion.robin("top", Where.plane([0, 0, 1], side), h=1.0, ambient=ambient),
        BoundaryRegion.neumann("bottom", Where.plane([0, 0, -1], 0.0)),
        BoundaryRegion.neumann("left", Where.plane([-1, 0, 0], 0.0)),
        BoundaryRegion.neumann("right", Where.plane([1, 0, 0], side)),
        BoundaryRegion.neumann("front", Where.plane([0, -1, 0], 0.0)),
        BoundaryRegion.neumann("back", Where.plane([0, 1, 0], side)),
    )
    problem = ProblemSpec(
        material=MaterialField.constant(1.0, 1.0, np.eye(3), dim=3),
        bcs=BoundaryData(regions=regions),
        initial=0.0,
        dirichlet_mode=DirichletMode.PENALTY,
    )
    return CaseSetup(
        id="Ex2_7",
        partition=partition,
        problem=problem,
        reference=robin_slab_reference(side, biot=1.0 * side / 1.0, k33=1.0, rho_c=1.0),
        window=(0.0, cfg["t_final"]),
        config=cfg,
        **_scheme_fields(cfg),
    )


REGISTRY = {
    "Ex1_1": _case_ex1_1,
    "Ex1_2": _case_ex1_2,
    "Ex1_3": lambda ov: _graded_square_case("Ex1_3", "exponential", 3.0, 1.0, 20.0, ov),
    "Ex1_4": lambda ov: _graded_square_case("Ex1_4", "exp_square", 2.0, 1.0, 20.0, ov),
    "Ex1_5": lambda ov: _graded_square_case("Ex1_5", "trigonometric", 2.0, 0.0, 100.0, ov),
    "Ex1_6": lambda ov: _graded_square_case("Ex1_6", "power_law", 3.0, 1.0, 20.0, ov),
    "Ex1_7": _case_ex1_7,
    "Ex2_1": _case_ex2_1,
    "Ex2_2": _case_ex2_2,
    "Ex2_3": _case_ex2_3,
    "Ex2_4": _case_ex2_4,
    "Ex2_5": _case_ex2_5,
    "Ex2_6": _case_ex2_6,
    "Ex2_7": _case_ex2_7,
}


def list_benchmarks() -> list[str]:
    return sorted(REGISTRY)


def build_case(case_id: str, overrides: dict | None = None) -> CaseSetup:
    if case_id not in REGISTRY:
        raise KeyError(f"unknown benchmark {case_id!r}; known: {list_benchmarks()}")
    return REGISTRY[case_id](overrides or {})


def run_benchmark(case_id: str, overrides: dict | None = None) -> ErrorReport:
    """Build and run one registered benchmark, returning its error report."""
    return run_case(build_case(case_id, overrides)).report
