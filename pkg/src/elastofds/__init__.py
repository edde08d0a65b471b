"""Fast direct Galerkin BEM for 2D time-harmonic elastic scattering by a traction-free cavity."""

from .assembly import Assembler, MemoryBudgetError, default_alpha, mass_matrix
from .compression import (InterpolativeDecomposition, NoCompressionWarning, ProxyBuilder,
                          interpolative_decompose)
from .dense_solver import (ConditionWarning, DenseFactorization, SolverError, conv_solve,
                           conv_solve_non_bm, solve_conv)
from .engine import BACKEND, available_backends
from .fds import FactorizationError, FastDirectSolver
from .geometry import (BoundaryCurve, BoundaryMesh, ClusterTree, Polygon, build_mesh,
                       build_tree, circle_mesh, read_mesh, write_mesh)
from .kernels import double_layer_kernel, fundamental
from .medium import (BurtonMillerCoupling, ElasticMedium, IncidentWave, ParameterError,
                     default_medium, incident_displacement, incident_traction,
                     medium_from_speeds)
from .postprocess import (FieldSample, ProximityError, evaluate_field, nearest_node,
                          nodal_intensity, null_field_residual)

__version__ = "0.1.0"

__all__ = [
    "Assembler", "MemoryBudgetError", "default_alpha", "mass_matrix",
    "InterpolativeDecomposition", "NoCompressionWarning", "ProxyBuilder",
    "interpolative_decompose",
    "ConditionWarning", "DenseFactorization", "SolverError", "conv_solve",
    "conv_solve_non_bm", "solve_conv",
    "BACKEND", "available_backends",
    "FactorizationError", "FastDirectSolver",
    "BoundaryCurve", "BoundaryMesh", "ClusterTree", "Polygon", "build_mesh", "build_tree",
    "circle_mesh", "read_mesh", "write_mesh",
    "double_layer_kernel", "fundamental",
    "BurtonMillerCoupling", "ElasticMedium", "IncidentWave", "ParameterError",
    "default_medium", "incident_displacement", "incident_traction", "medium_from_speeds",
    "FieldSample", "ProximityError", "evaluate_field", "nearest_node", "nodal_intensity",
    "null_field_residual",
]
