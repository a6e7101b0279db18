"""Time integration: explicit/implicit Euler and Chebyshev-collocation iteration.

The collocation scheme corrects a whole finitely-large interval at once: an
interval carries M Chebyshev-Gauss-Lobatto nodes, a differentiation matrix
turns nodal values into nodal derivatives, and a Newton-type correction is
iterated until the update stalls below the tolerance. For linear systems a
single correction is exact, so large interval lengths remain stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import SemiDiscreteSystem, SparseSymmetric, StrongDirichlet, impose_strong_dirichlet
from .errors import Diverged, IllConditionedBasis, NotConverged, SingularIteration

COND_LIMIT_BASIS = 1e6  # about six digits of headroom in the basis solve


@dataclass(frozen=True)
class ChebOperator:
    """CGL nodes on an interval and the spectral differentiation matrix."""

    m: int
    t_a: float
    t_b: float
    nodes: np.ndarray  # ascending, nodes[0] = t_a, nodes[-1] = t_b
    matrix: np.ndarray  # (m, m), nodal values -> nodal time derivatives


def cgl_nodes(m: int, t_a: float, t_b: float) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes mapped to [t_a, t_b], ascending."""
    if m < 2:
        raise ValueError("need at least two nodes")
    if not t_b > t_a:
        raise ValueError("t_b must exceed t_a")
    s = np.cos(np.pi * np.arange(m - 1, -1, -1) / (m - 1))
    s[0], s[-1] = -1.0, 1.0
    nodes = t_a + 0.5 * (s + 1.0) * (t_b - t_a)
    nodes[0], nodes[-1] = t_a, t_b
    return nodes


def _chebyshev_table(s: np.ndarray, m: int):
    """Values and derivatives of the first-kind Chebyshev basis at points s."""
    q = np.empty((len(s), m))
    dq = np.empty((len(s), m))
    q[:, 0] = 1.0
    dq[:, 0] = 0.0
    if m > 1:
        q[:, 1] = s
        dq[:, 1] = 1.0
    u_prev = np.ones_like(s)  # U_0
    u = 2.0 * s  # U_1
    for n in range(2, m):
        q[:, n] = 2.0 * s * q[:, n - 1] - q[:, n - 2]
        dq[:, n] = n * u  # T_n' = n U_{n-1}
        u_prev, u = u, 2.0 * s * u - u_prev
    return q, dq


def cheb_diff(m: int, t_a: float, t_b: float) -> ChebOperator:
    """Differentiation matrix of the degree m-1 interpolant through CGL nodes.

    Built as the basis-derivative table times the inverse of the basis value
    table; exact for polynomials up to degree m-1.
    """
    nodes = cgl_nodes(m, t_a, t_b)
    s = (2.0 * (nodes - t_a) / (t_b - t_a)) - 1.0
    q, dq = _chebyshev_table(s, m)
    if np.linalg.cond(q) > COND_LIMIT_BASIS:
        raise IllConditionedBasis(f"basis value matrix condition {np.linalg.cond(q):.1e}")
    dq *= 2.0 / (t_b - t_a)
    matrix = np.linalg.solve(q.T, dq.T).T
    return ChebOperator(m=m, t_a=t_a, t_b=t_b, nodes=nodes, matrix=matrix)


@dataclass(frozen=True)
class LvimConfig:
    """Collocation-iteration controls: nodes per interval, tolerance, cap."""

    nodes: int = 5
    tol: float = 1e-8
    max_iter: int = 50
    dt: float | None = None  # default interval length for march()

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("need at least two collocation nodes")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("interval length must be positive")


@dataclass(frozen=True)
class ForwardEuler:
    pass


@dataclass(frozen=True)
class BackwardEuler:
    pass


@dataclass(frozen=True)
class Lvim:
    config: LvimConfig = field(default_factory=LvimConfig)


@dataclass(frozen=True)
class Trajectory:
    """Recorded (time, nodal vector) samples plus iteration metadata."""

    times: np.ndarray  # strictly increasing, times[0] = 0
    values: np.ndarray  # (nt, L)
    iterations: tuple = ()  # per interval (collocation scheme only)
    corrections: tuple = ()  # per interval correction-norm histories

    def at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not recorded (closest is {self.times[idx]})")
        return self.values[idx]


def dense_linear_system(c_mat, k_mat, load=None) -> SemiDiscreteSystem:
    """Wrap small dense C, K, q(t) into a semi-discrete system (test harness)."""
    c_mat = np.atleast_2d(np.asarray(c_mat, dtype=float))
    k_mat = np.atleast_2d(np.asarray(k_mat, dtype=float))
    n = c_mat.shape[0]
    if load is None:
        load_fn = lambda t: np.zeros(n)
    elif callable(load):
        load_fn = lambda t: np.asarray(load(t), dtype=float)
    else:
        qv = np.asarray(load, dtype=float)
        load_fn = lambda t: qv
    return SemiDiscreteSystem(
        C=SparseSymmetric(sp.csr_matrix(c_mat)),
        K=SparseSymmetric(sp.csr_matrix(k_mat)),
        load=load_fn,
        dirichlet=StrongDirichlet(ids=np.array([], dtype=int), data=()),
        L=n,
        coords=np.zeros((n, 1)),
    )


class _IntervalSolver:
    """Factored collocation matrix for intervals of one fixed length."""

    def __init__(self, system: SemiDiscreteSystem, cheb: ChebOperator, free: np.ndarray):
        c_ff = system.C.matrix[free][:, free].tocsc()
        k_ff = system.K.matrix[free][:, free].tocsc()
        d_sub = cheb.matrix[1:, 1:]
        m1 = cheb.m - 1
        a = sp.kron(sp.csc_matrix(d_sub), c_ff) + sp.kron(sp.identity(m1, format="csc"), k_ff)
        try:
            self.lu = splu(a.tocsc())
        except RuntimeError as exc:
            raise SingularIteration(f"interval matrix factorization failed: {exc}") from exc
        self.cheb = cheb
        self.free = free

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = self.lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SingularIteration("interval solve produced non-finite values")
        return out


def lvim_interval(
    system: SemiDiscreteSystem,
    u_start: np.ndarray,
    t_a: float,
    t_b: float,
    cfg: LvimConfig,
    solver: _IntervalSolver | None = None,
):
    """Correctional collocation solve of one interval.

    Returns (values at all nodes as an (M, L) array, iteration count,
    correction-norm history). Node 1 is pinned to ``u_start``; constrained
    points follow their boundary data at every node time.
    """
    m = cfg.nodes
    if solver is None:
        free = system.free
        solver = _IntervalSolver(system, cheb_diff(m, t_a, t_b), free)
    cheb = solver.cheb
    nodes = cgl_nodes(m, t_a, t_b)
    free = solver.free
    nf = len(free)
    cons = system.dirichlet.ids

    u_nodes = np.tile(np.asarray(u_start, dtype=float), (m, 1))
    for j in range(1, m):
        if len(cons):
            u_nodes[j, cons] = system.dirichlet_values(nodes[j])
    q_nodes = np.stack([np.asarray(system.load(nodes[j])) for j in range(1, m)])

    c_mat = system.C.matrix
    k_mat = system.K.matrix
    corrections: list[float] = []
    for it in range(1, cfg.max_iter + 1):
        dotu = cheb.matrix @ u_nodes  # (m, L) nodal time derivatives
        resid = (c_mat @ dotu[1:].T).T + (k_mat @ u_nodes[1:].T).T - q_nodes
        delta = solver.solve(-resid[:, free].ravel())
        u_nodes[1:, free] += delta.reshape(m - 1, nf)
        corr = float(np.abs(delta).max()) if delta.size else 0.0
        corrections.append(corr)
        if corr <= cfg.tol * (1.0 + float(np.abs(u_nodes).max())):
            return u_nodes, it, corrections
    raise NotConverged(
        f"collocation iteration did not converge in {cfg.max_iter} iterations", corrections[-1]
    )


def march(
    system: SemiDiscreteSystem,
    u0: np.ndarray,
    scheme,
    dt: float | None = None,
    t_final: float | None = None,
) -> Trajectory:
    """March the system from u0 at t = 0 to t_final in steps of dt."""
    if isinstance(scheme, Lvim) and dt is None:
        dt = scheme.config.dt
    if dt is None or t_final is None:
        raise ValueError("dt and t_final are required")
    n_steps = int(round(t_final / dt))
    if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-8 * max(abs(t_final), dt):
        raise ValueError(f"dt={dt} does not divide t_final={t_final}")

    u0 = np.asarray(u0, dtype=float).copy()
    guard = 1e12 * max(1.0, float(np.abs(u0).max()))
    free = system.free
    cons = system.dirichlet.ids
    c_mat = system.C.matrix
    k_mat = system.K.matrix

    times = [0.0]
    values = [u0.copy()]
    iterations: list[int] = []
    corrections: list[list[float]] = []

    if isinstance(scheme, Lvim):
        cfg = scheme.config
        solver = _IntervalSolver(system, cheb_diff(cfg.nodes, 0.0, dt), free)
        u = u0
        for step in range(n_steps):
            t_a = step * dt
            local = ChebOperator(
                m=cfg.nodes,
                t_a=t_a,
                t_b=t_a + dt,
                nodes=solver.cheb.nodes + t_a,
                matrix=solver.cheb.matrix,
            )
            shifted = _IntervalSolver.__new__(_IntervalSolver)
            shifted.lu = solver.lu
            shifted.cheb = local
            shifted.free = free
            u_nodes, it, corr = lvim_interval(system, u, t_a, t_a + dt, cfg, solver=shifted)
            iterations.append(it)
            corrections.append(corr)
            for j in range(1, cfg.nodes):
                times.append(local.nodes[j])
                values.append(u_nodes[j].copy())
            u = u_nodes[-1]
            if np.abs(u).max() > guard:
                raise Diverged(f"state norm exceeded guard at t={t_a + dt}")
    else:
        if isinstance(scheme, BackwardEuler):
            a_mat = (c_mat + dt * k_mat).tocsr()
            a_ff = splu(a_mat[free][:, free].tocsc())
            a_fc = a_mat[free][:, cons].tocsr() if len(cons) else None
        elif isinstance(scheme, ForwardEuler):
            c_ff = splu(c_mat[free][:, free].tocsc())
            c_fc = c_mat[free][:, cons].tocsr() if len(cons) else None
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        u = u0
        for step in range(n_steps):
            t_next = (step + 1) * dt
            u_next = np.empty_like(u)
            ucv = system.dirichlet_values(t_next) if len(cons) else None
            if isinstance(scheme, BackwardEuler):
                rhs_full = c_mat @ u + dt * np.asarray(system.load(t_next))
                rhs = rhs_full[free]
                if len(cons):
                    rhs = rhs - a_fc @ ucv
                u_next[free] = a_ff.solve(rhs)
            else:
                rhs_full = c_mat @ u + dt * (np.asarray(system.load(step * dt)) - k_mat @ u)
                rhs = rhs_full[free]
                if len(cons):
                    rhs = rhs - c_fc @ ucv
                u_next[free] = c_ff.solve(rhs)
            if len(cons):
                u_next[cons] = ucv
            u = u_next
            if not np.all(np.isfinite(u)) or np.abs(u).max() > guard:
                raise Diverged(f"state norm exceeded guard at t={t_next}")
            times.append(t_next)
            values.append(u.copy())

    return Trajectory(
        times=np.array(times),
        values=np.array(values),
        iterations=tuple(iterations),
        corrections=tuple(tuple(c) for c in corrections),
    )


def solve_steady(system: SemiDiscreteSystem, t: float = 0.0) -> np.ndarray:
    """Steady-state solution K u = q with strong Dirichlet substitution."""
    from scipy.sparse.linalg import spsolve

    red = impose_strong_dirichlet(system, t)
    if len(red.free) == 0:
        return red.expand(np.array([]))
    u_f = spsolve(red.matrix.tocsc(), red.rhs)
    return red.expand(u_f)
