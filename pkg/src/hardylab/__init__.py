"""Numerical Cauchy-Leray/Levi transforms, Cauchy-Szego projections and Hardy-space
measurements on quadric strongly pseudoconvex domains in C^1 and C^2."""

__version__ = "0.1.0"

from .geometry import DefiningFunction, from_spec, t_max
from .mesh import BoundaryFunction, BoundaryMesh, build_mesh, weighted_measure
from .kernels import DenominatorSpec, kernel_density, quasi_distance
from .transforms import CauchyOperator, interior_cauchy, shifted_cauchy_approximant
from .szego import kerzman_stein_szego, weighted_szego, projection_identities
from .hardy import ConeParams, density_experiment, norm_equivalence_report

__all__ = [
    "DefiningFunction", "from_spec", "t_max",
    "BoundaryFunction", "BoundaryMesh", "build_mesh", "weighted_measure",
    "DenominatorSpec", "kernel_density", "quasi_distance",
    "CauchyOperator", "interior_cauchy", "shifted_cauchy_approximant",
    "kerzman_stein_szego", "weighted_szego", "projection_identities",
    "ConeParams", "density_experiment", "norm_equivalence_report",
]
