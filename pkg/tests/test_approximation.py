import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpmheat.approximation import gfd_operator, gfd_operators, shape_row, shape_values
from fpmheat.errors import InsufficientSupport, SingularSupport
from fpmheat.geometry import ConvexDomain, PointCloud, build_partition

from conftest import grid_points


class _Stencil:
    """Minimal partition stand-in: one cell with a prescribed neighbor list."""

    def __init__(self, n_neighbors):
        self.adjacency = [np.arange(1, n_neighbors + 1)]
        self.n = 1


def make_cloud(coords):
    coords = np.asarray(coords, dtype=float)
    return PointCloud(coords, np.zeros(len(coords), bool))


class TestGfdOperator:
    def test_forward_difference_stencil(self):
        cloud = make_cloud([[0, 0], [1, 0], [0, 1]])
        op = gfd_operator(0, _Stencil(2), cloud)
        assert op.matrix == pytest.approx(np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))

    def test_collinear_neighbors_rejected(self):
        cloud = make_cloud([[0, 0], [1, 0], [2, 0]])
        with pytest.raises(SingularSupport):
            gfd_operator(0, _Stencil(2), cloud)

    def test_cross_stencil_matches_normal_equation_oracle(self):
        # oracle: explicit least-squares solve of the offset system
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        offsets = coords[1:] - coords[0]
        gram = offsets.T @ offsets  # diag(2, 2)
        stencil = np.linalg.solve(gram, offsets.T)  # maps (u_i - u_0) to gradient
        expected = np.hstack([-stencil.sum(axis=1, keepdims=True), stencil])
        op = gfd_operator(0, _Stencil(4), make_cloud(coords))
        assert op.matrix == pytest.approx(expected, abs=1e-14)
        assert op.matrix[0] == pytest.approx([0.0, 0.5, -0.5, 0.0, 0.0], abs=1e-14)
        assert op.matrix[1] == pytest.approx([0.0, 0.0, 0.0, 0.5, -0.5], abs=1e-14)

    def test_insufficient_support(self):
        cloud = make_cloud([[0, 0], [1, 0]])
        with pytest.raises(InsufficientSupport):
            gfd_operator(0, _Stencil(1), cloud)

    def test_rows_annihilate_constants(self, random100):
        for op in gfd_operators(random100, random100.points):
            assert np.abs(op.matrix.sum(axis=1)).max() <= 1e-12 * max(1.0, np.abs(op.matrix).max())


class TestShapeRow:
    def test_kronecker_at_generating_point(self):
        coords = np.array([[0.2, 0.3], [1.0, 0.1], [0.1, 1.2]])
        op = gfd_operator(0, _Stencil(2), make_cloud(coords))
        row = shape_row(coords[0], 0, op, make_cloud(coords))
        assert row.values == pytest.approx([1.0, 0.0, 0.0], abs=1e-14)

    def test_cross_stencil_half_step(self):
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        op = gfd_operator(0, _Stencil(4), make_cloud(coords))
        row = shape_row([0.5, 0.0], 0, op, make_cloud(coords))
        assert row.values == pytest.approx([1.0, 0.25, -0.25, 0.0, 0.0], abs=1e-14)

    def test_partition_of_unity_random_points(self, random100):
        rng = np.random.default_rng(5)
        ops = gfd_operators(random100, random100.points)
        for i in range(random100.n):
            xs = random100.cells[i].centroid + 0.05 * rng.standard_normal((100, 2))
            vals = shape_values(xs, i, ops[i], random100.points)
            assert np.abs(vals.sum(axis=1) - 1.0).max() <= 1e-12


@st.composite
def support_configs(draw, dim):
    m = draw(st.integers(min_value=dim, max_value=dim + 5))
    rng = np.random.default_rng(draw(st.integers(min_value=0, max_value=10_000)))
    x0 = rng.uniform(-1, 1, dim)
    while True:
        offsets = rng.uniform(-1, 1, (m, dim))
        s = np.linalg.svd(offsets, compute_uv=False)
        if s[-1] > 0.15:  # keep the fit well-conditioned
            break
    return x0, x0 + offsets


class TestProperties:
    @settings(max_examples=1000, deadline=None)
    @given(support_configs(dim=2))
    def test_linear_exactness_2d(self, config):
        x0, neighbors = config
        coords = np.vstack([x0, neighbors])
        op = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords))
        a, g = 0.7, np.array([1.3, -2.1])
        u = a + coords @ g
        assert op.matrix @ u == pytest.approx(g, rel=1e-10, abs=1e-10)
        x = x0 + np.array([0.3, -0.2])
        row = shape_row(x, 0, op, make_cloud(coords))
        assert row.values @ u == pytest.approx(a + x @ g, rel=1e-10, abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(support_configs(dim=3))
    def test_linear_exactness_3d(self, config):
        x0, neighbors = config
        coords = np.vstack([x0, neighbors])
        op = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords))
        g = np.array([0.5, -1.0, 2.0])
        u = coords @ g - 3.0
        assert op.matrix @ u == pytest.approx(g, rel=1e-10, abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(support_configs(dim=2), st.floats(-5, 5), st.floats(-5, 5))
    def test_translation_invariance(self, config, sx, sy):
        x0, neighbors = config
        shift = np.array([sx, sy])
        coords = np.vstack([x0, neighbors])
        op_a = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords))
        op_b = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords + shift))
        assert op_b.matrix == pytest.approx(op_a.matrix, abs=1e-12 * max(1, np.abs(op_a.matrix).max()))
        x = x0 + np.array([0.1, 0.2])
        row_a = shape_row(x, 0, op_a, make_cloud(coords))
        row_b = shape_row(x + shift, 0, op_b, make_cloud(coords + shift))
        assert row_b.values == pytest.approx(row_a.values, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(support_configs(dim=2), st.floats(0, 2 * np.pi))
    def test_rotation_equivariance_2d(self, config, angle):
        x0, neighbors = config
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        coords = np.vstack([x0, neighbors])
        op_a = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords))
        op_b = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords @ rot.T))
        assert op_b.matrix == pytest.approx(rot @ op_a.matrix, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(support_configs(dim=3), st.floats(0, 2 * np.pi), st.floats(-1, 1))
    def test_rotation_equivariance_3d(self, config, angle, axis_z):
        x0, neighbors = config
        axis = np.array([np.sqrt(max(0.0, 1 - axis_z**2)), 0.0, axis_z])
        c, s = np.cos(angle), np.sin(angle)
        cross = np.array(
            [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
        )
        rot = c * np.eye(3) + s * cross + (1 - c) * np.outer(axis, axis)
        coords = np.vstack([x0, neighbors])
        op_a = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords))
        op_b = gfd_operator(0, _Stencil(len(neighbors)), make_cloud(coords @ rot.T))
        assert op_b.matrix == pytest.approx(rot @ op_a.matrix, abs=1e-9)


class TestOnRealPartition:
    def test_boundary_cells_with_exactly_d_neighbors(self, unit_square):
        # 3x3 grid corners have exactly two neighbors (= dim): accepted
        part = build_partition(grid_points(3), unit_square)
        op = gfd_operator(0, part, part.points)
        assert op.size == 3
        u = part.points.coords @ np.array([2.0, -1.0]) + 0.5
        assert op.matrix @ u[op.support] == pytest.approx([2.0, -1.0], abs=1e-12)
