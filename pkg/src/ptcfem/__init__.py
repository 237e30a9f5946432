"""Adaptive pseudo-transient continuation for quasilinear convection-diffusion."""

from .adaptivity import (AdaptiveRunConfig, IndicatorField, LevelReport,
                         adaptive_solve, compute_indicators, mark, phi_split,
                         update_gamma)
from .assembly import (AssemblyError, assemble_jacobian, assemble_laplacian,
                       assemble_residual, edge_jump, h1_error)
from .fields import DiscreteField, nodal_interpolant, zero_field
from .linalg import SingularMatrixError, add_scaled, direct_solve, matvec
from .mesh import (MarkedSet, Mesh, MeshError, crisscross_mesh,
                   element_diameter, interpolate, refine, unit_square_mesh)
from .problems import (ExactSolution, ProblemSpec, example_1, example_2,
                       example_3, linear_poisson, manufactured)
from .solver import (BACKWARD_EULER, CONVERGED, FAILED, NEWMARK,
                     NORMAL_EQUATIONS_BE, NORMAL_EQUATIONS_NEWMARK,
                     SIGMA_SPLIT_NEWMARK, STALLED_ACCEPT, SolveOutcome,
                     SolverConfig, SolverState, check_exit, regularizer,
                     solve_on_partition, step_system, update_alpha,
                     update_sigma)

__version__ = "0.1.0"
