"""Discontinuous Galerkin solver for ``A : D^2 u = f`` with Cordes coefficients
on curved two-dimensional domains."""
from .assembly import (DGSystem, PenaltyConfig, Penalties, assemble_A, assemble_B_star,
                       assemble_B_theta, assemble_J, assemble_rhs, assemble_system,
                       calibrate_penalty, penalties)
from .analysis import (ConsistencyReport, EOCTable, ErrorReport, consistency_residual,
                       eoc, errors_vs_exact, norm_h_theta, solve)
from .coefficients import (BoundaryData, CoefficientField, CordesReport, DomainSpec,
                           ExactSolution, check_cordes, gamma, get_domain, get_problem)
from .errors import (ConfigurationError, CordesError, GeometryError,
                     InvalidCoefficientError, ResolutionError, SnapError, SolverError)
from .fe import DGSpace
from .mesh import (CurvedMesh, MeshReport, generate_affine_mesh, mesh_sequence, read_mesh,
                   refine, snap_boundary, validate, write_mesh)

__version__ = "0.1.0"
