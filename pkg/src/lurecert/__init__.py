"""Incremental stability certificates for Lur'e systems via piecewise-affine approximation."""
from .errors import *  # noqa: F401,F403
from .nonlin import (
    Nonlinearity,
    PwaApproximation,
    build_partition,
    derivative_image_length,
    evaluate_pwa,
    from_catalog,
    required_partition_size,
    verify_error_lipschitz,
)
from .reformulate import LureSystem, augment, cell_polyhedron, facet_adjacency, to_pwa_lure
from .lmi import (
    Certificate,
    LmiOptions,
    LmiProblem,
    assemble_circle_criterion,
    assemble_theorem2,
    census,
    lift_diagonal,
)
from .solve import CertifyReport, SolverOptions, certify, solve_feasibility
from .verify import check_certificate, check_decrease, evaluate_V, hinf_channel_gain, simulate_pair

__version__ = "0.1.0"
