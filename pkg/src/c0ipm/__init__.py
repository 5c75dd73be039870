"""C0 interior penalty finite elements for flexoelectricity and strain gradient elasticity."""

from .assembly import (
    GlobalSystem, apply_constraints, assemble, assemble_rhs, element_matrices, face_matrices,
)
from .config import ProblemSpec, parse_config
from .errors import *  # noqa: F401,F403
from .exact import ExactField, manufactured_source
from .material import (
    MaterialParameters, MaterialTensors, PointKinematics, PointStresses, build_material_tensors,
    double_traction, evaluate_constitutive,
)
from .mesh import (
    BoundarySpec, Mesh, apply_boundary_spec, build_connectivity, read_mesh, structured_mesh, write_mesh,
)
from .penalty import PenaltyEstimate, assemble_penalty_forms, beta_from_formula, estimate_penalty
from .post import BeamReport, convergence_rates, effective_piezo, export, l2_error
from .presets import run_preset
from .refelem import build_reference_element, flip_permutation, physical_geometry, tabulate
from .solver import SolutionField, solve

__version__ = "0.1.0"
