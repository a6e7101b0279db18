import numpy as np
import pytest

from fpmheat.errors import InvalidBoundarySpec
from fpmheat.geometry import ConvexDomain, FaceKind, PointCloud, build_partition
from fpmheat.problem import (
    BoundaryData,
    BoundaryRegion,
    MaterialField,
    Where,
    gradation_profile,
    heaviside,
    robin_series_solution,
)
from fpmheat.problem import _robin_roots

from conftest import grid_points


class TestGradationProfiles:
    def test_exponential_homogeneous_limit(self):
        f = gradation_profile("exponential", 0.0, 1.0)
        assert f(np.linspace(0, 1, 7)) == pytest.approx(np.ones(7))

    def test_exp_square_at_origin(self):
        assert gradation_profile("exp_square", 2.0, 1.0)(0.0) == pytest.approx(4.0)

    def test_power_law_at_length(self):
        assert gradation_profile("power_law", 3.0, 1.0)(1.0) == pytest.approx(16.0)

    def test_trigonometric(self):
        f = gradation_profile("trigonometric", 2.0, 1.0)
        y = 0.37
        assert f(y) == pytest.approx((np.cos(2 * y) + 5 * np.sin(2 * y)) ** 2)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gradation_profile("cubic", 1.0, 1.0)

    def test_nonpositive_length(self):
        with pytest.raises(ValueError):
            gradation_profile("exponential", 1.0, 0.0)


class TestRobinSeries:
    def test_first_root_m1(self):
        # oracle: bisection on beta*tan(beta) = 1 over (0, pi/2)
        lo, hi = 1e-9, np.pi / 2 - 1e-9
        g = lambda b: b * np.tan(b) - 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if g(mid) < 0 else (lo, mid)
        beta1 = 0.5 * (lo + hi)
        assert _robin_roots(1.0, 1)[0] == pytest.approx(beta1, abs=1e-11)
        assert beta1 == pytest.approx(0.8603, abs=1e-4)

    @pytest.mark.parametrize("m", [0.5, 1.0, 10.0, 100.0])
    def test_roots_satisfy_equation_in_brackets(self, m):
        roots = _robin_roots(m, 20)
        for i, b in enumerate(roots, start=1):
            assert (i - 1) * np.pi < b < (i - 0.5) * np.pi
            assert abs(b * np.sin(b) - m * np.cos(b)) <= 1e-9 * max(1.0, m)

    def test_initial_condition_limit(self):
        # truncation tail is O(1/n) only at the convective face itself,
        # so the 1e-3 bound applies away from z = L
        z = np.linspace(0, 9, 10)
        u = robin_series_solution(z, 0.0, 10.0, 10.0, 1.0, 1.0, 50)
        assert np.abs(u).max() <= 1e-3
        surface = robin_series_solution(10.0, 0.0, 10.0, 10.0, 1.0, 1.0, 50)
        assert abs(surface) < 0.05

    def test_steady_limit(self):
        u = robin_series_solution(np.array([0.0, 5.0, 10.0]), 1e9, 10.0, 10.0, 1.0, 1.0, 50)
        assert u == pytest.approx(np.ones(3), abs=1e-12)

    def test_requires_positive_biot_and_roots(self):
        with pytest.raises(ValueError):
            robin_series_solution(0.0, 1.0, 10.0, -1.0, 1.0, 1.0, 10)
        with pytest.raises(ValueError):
            robin_series_solution(0.0, 1.0, 10.0, 1.0, 1.0, 1.0, 0)


class TestHeaviside:
    def test_values(self):
        assert heaviside(-1e-12) == 0.0
        assert heaviside(0.0) == 1.0
        assert heaviside(2.0) == 1.0


class TestMaterialField:
    def test_constant_validation(self):
        mat = MaterialField.constant(2.0, 3.0, [[2.0, 0.5], [0.5, 1.0]])
        pts = np.random.default_rng(0).uniform(0, 1, (20, 2))
        mat.validate(pts)
        assert mat.rho_c(pts) == pytest.approx(np.full(20, 6.0))

    def test_asymmetric_tensor_rejected(self):
        mat = MaterialField.constant(1.0, 1.0, [[1.0, 0.3], [0.0, 1.0]])
        with pytest.raises(ValueError):
            mat.validate(np.array([[0.5, 0.5]]))

    def test_indefinite_tensor_rejected(self):
        mat = MaterialField.constant(1.0, 1.0, [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValueError):
            mat.validate(np.array([[0.5, 0.5]]))

    def test_piecewise_owner_side(self):
        top = MaterialField.constant(1.0, 1.0, 2.0 * np.eye(2))
        bottom = MaterialField.constant(1.0, 1.0, 1.0 * np.eye(2))
        mat = MaterialField.piecewise(
            [(lambda pts: np.atleast_2d(pts)[:, 1] > 50.0, top), (None, bottom)], dim=2
        )
        pts = np.array([[10.0, 75.0], [10.0, 25.0], [10.0, 50.0]])
        k = mat.conductivity(pts)
        assert k[0, 0, 0] == 2.0
        assert k[1, 0, 0] == 1.0
        assert k[2, 0, 0] == 1.0  # exactly on the interface: falls to the default side
        # deterministic: same answer twice
        assert np.array_equal(mat.conductivity(pts), k)


class TestBoundaryClassification:
    def build(self):
        domain = ConvexDomain.from_box([0, 0], [1, 1])
        return build_partition(grid_points(3), domain)

    def test_classify_assigns_exactly_one_region(self):
        part = self.build()
        bcs = BoundaryData(
            regions=(
                BoundaryRegion.dirichlet("left", Where.plane([-1, 0], 0.0), 1.0),
                BoundaryRegion.dirichlet("right", Where.plane([1, 0], 1.0), 2.0),
                BoundaryRegion.neumann("bottom", Where.plane([0, -1], 0.0)),
                BoundaryRegion.robin("top", Where.plane([0, 1], 1.0), h=2.0, ambient=3.0),
            )
        )
        classified = bcs.classify(part)
        kinds = {f.kind for f in classified.faces}
        assert FaceKind.BOUNDARY not in kinds
        assert {FaceKind.DIRICHLET, FaceKind.NEUMANN, FaceKind.ROBIN} <= kinds
        top = [f for f in classified.faces if f.kind is FaceKind.ROBIN]
        assert all(np.allclose(f.centroid[1], 1.0) for f in top)

    def test_uncovered_face_rejected(self):
        part = self.build()
        bcs = BoundaryData(
            regions=(BoundaryRegion.dirichlet("left", Where.plane([-1, 0], 0.0), 1.0),)
        )
        with pytest.raises(InvalidBoundarySpec):
            bcs.classify(part)

    def test_doubly_covered_face_rejected(self):
        part = self.build()
        bcs = BoundaryData(
            regions=(
                BoundaryRegion.dirichlet("everything", Where.everywhere(), 1.0),
                BoundaryRegion.neumann("left", Where.plane([-1, 0], 0.0)),
            )
        )
        with pytest.raises(InvalidBoundarySpec):
            bcs.classify(part)

    def test_negative_robin_h_rejected(self):
        part = self.build()
        bcs = BoundaryData(
            regions=(
                BoundaryRegion.robin("all", Where.everywhere(), h=-1.0, ambient=0.0),
            )
        )
        with pytest.raises(InvalidBoundarySpec):
            bcs.classify(part)

    def test_dirichlet_point_mask(self):
        part = self.build()
        bcs = BoundaryData(
            regions=(
                BoundaryRegion.dirichlet("left", Where.plane([-1, 0], 0.0), 1.0),
                BoundaryRegion.neumann("rest", Where.predicate(
                    lambda c, n: c[:, 0] > 1e-9, lambda p: p[:, 0] > 1e-9
                )),
            )
        )
        mask, region_of = bcs.dirichlet_point_mask(part.points.coords)
        expect = part.points.coords[:, 0] == 0.0
        assert np.array_equal(mask, expect)
        assert np.all(region_of[mask] == 0)
