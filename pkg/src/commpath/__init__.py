"""Piecewise smooth paths between nearby commuting matrix tuples.

Grid approximants of commuting hermitian tuples, isospectral rotations built
from almost commuting unitary corrections, and certified paths on the matrix
cube, disk, torus, sphere, spherical unitaries and chart-described manifolds.
"""

__version__ = "0.1.0"

from .interpolant import (
    IsospectralInterpolant,
    almost_commuting_unitary_correction,
    build_interpolant,
    projection_exchange_unitary,
    unitary_log_generator,
)
from .linalg import (
    BudgetInfeasible,
    Conjugation,
    ConvergenceError,
    JointSpectrum,
    MatrixTuple,
    NotCommutingError,
    conjugation_morphism,
    eigenvalue_assignment,
    full_pinching,
    hausdorff_distance,
    hermitian_partition,
    interleaved_juncture,
    interleaved_partition,
    joint_diagonalize,
    juncture,
    metric_eth,
    pseudospectrum_member,
)
from .manifold import (
    ChartAtlas,
    ManifoldPoint,
    builtin_atlas,
    manifold_cpma,
    snap_to_manifold,
    variety_residuals,
)
from .paths import (
    MatrixPath,
    concat,
    connect,
    connect_cube,
    connect_disk,
    connect_manifold,
    connect_sphere,
    connect_spherical_unitary,
    connect_torus,
    constant_path,
)
from .pma import DeltaGrid, ProjectiveDecomposition, build_grids, cpma_1d, cpma_md
from .sampling import perturb_tuple, random_tuple
from .scp import SCPMap, apply_scp, connect_scp, scp_deviation_bound_check
from .verify import Tolerances, certify_interpolant, certify_path

__all__ = [name for name in dir() if not name.startswith("_")]
