import numpy as np
import pytest

from fpmheat.geometry import ConvexDomain, PointCloud, build_partition


@pytest.fixture(scope="session")
def unit_square():
    return ConvexDomain.from_box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def unit_cube():
    return ConvexDomain.from_box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])


def grid_points(n, include_boundary=True, lo=0.0, hi=1.0, dim=2):
    if include_boundary:
        axis = np.linspace(lo, hi, n)
    else:
        axis = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh])
    if include_boundary:
        flags = np.any(np.isclose(coords, lo) | np.isclose(coords, hi), axis=1)
    else:
        flags = np.zeros(len(coords), dtype=bool)
    return PointCloud(coords=coords, boundary_flag=flags)


@pytest.fixture(scope="session")
def grid3x3(unit_square):
    return build_partition(grid_points(3), unit_square)


@pytest.fixture(scope="session")
def random100(unit_square):
    rng = np.random.default_rng(1234)
    coords = rng.uniform(0.02, 0.98, (100, 2))
    cloud = PointCloud(coords=coords, boundary_flag=np.zeros(100, dtype=bool))
    return build_partition(cloud, unit_square)
