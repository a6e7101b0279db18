"""Meshless solver for transient heat conduction in anisotropic nonhomogeneous media.

Spatial discretization uses point-based discontinuous trial functions on a
Voronoi partition with interior-penalty flux corrections; time integration
offers forward/backward Euler and a Chebyshev-collocation correctional
iteration that stays stable over large intervals.
"""

from .approximation import GradientOperator, ShapeRow, gfd_operator, gfd_operators, shape_row
from .assembly import (
    SemiDiscreteSystem,
    SparseSymmetric,
    assemble_capacity,
    assemble_conductivity,
    assemble_load,
    assemble_system,
    impose_strong_dirichlet,
)
from .bench import ErrorReport, error_norms, list_benchmarks, run_benchmark
from .geometry import (
    ConvexDomain,
    CrackSpec,
    Face,
    FaceKind,
    HePolicy,
    Partition,
    PointCloud,
    apply_crack,
    build_partition,
    face_length_scale,
    write_partition_vtk,
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
from .quadrature import QuadratureRule, build_quadrature
from .timeint import (
    BackwardEuler,
    ChebOperator,
    ForwardEuler,
    Lvim,
    LvimConfig,
    Trajectory,
    cgl_nodes,
    cheb_diff,
    lvim_interval,
    march,
    solve_steady,
)

__version__ = "0.1.0"
