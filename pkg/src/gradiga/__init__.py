"""Isogeometric finite-strain gradient elasticity on spline patches.

C1-continuous NURBS discretizations of elastic bodies whose strain
energy depends on the strain and its first gradient. Higher-order
Dirichlet data (normal derivatives of displacement) is enforced weakly
through a residual penalty; Newton tangents come from forward-mode
differentiation of the residual, so they are consistent by construction.
"""

from .analysis import (
    analytic_1d,
    convergence_study,
    displacement_max,
    energy_split,
    field_probe,
    hyperstress_work,
    interface_width,
    multiwell_initial_guess,
    seminorm_error,
    validation_bar,
)
from .assembly import (
    DirichletBC,
    EdgeLoad,
    ElementInversionError,
    FaceTraction,
    PointDirichlet,
    System,
    TorqueTraction,
    WeakNormalDerivativeBC,
)
from .autodiff import Dual, ein, extract_jacobian, lift
from .config import (
    BuiltProblem,
    ConfigError,
    build_system,
    list_shipped_configs,
    load_config,
    shipped_config,
    validate_config,
)
from .export import export_csv, export_vtk
from .kinematics import Kinematics, compute_kinematics
from .material import (
    MULTIWELL_ROOTS,
    MultiwellGradient1d,
    ToupinQuadratic,
    cauchy_pushforward,
    multiwell_energy_1d,
    multiwell_stress_1d,
)
from .mesh import (
    Patch,
    TableBuilder,
    box_patch,
    enumerate_boundary,
    evaluate_field,
    geometry_map,
    make_quadrature,
    physical_basis,
)
from .solver import (
    NewtonConfig,
    NonConvergenceError,
    SingularSystemError,
    SolveReport,
    linear_solve,
    newton_solve,
)
from .splines import (
    KnotVector,
    eval_basis,
    find_span,
    greville_points,
    rational_tensor_basis,
    uniform_open_knots,
)

__version__ = "0.1.0"
