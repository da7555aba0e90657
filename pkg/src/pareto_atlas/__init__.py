"""Pareto sets of strongly convex multiobjective problems.

Weighted-sum scalarization over the weight simplex, solved by damped Newton,
with numerical certificates for the geometry of the solution map: Jacobian
corank bounds, fold tests, face-nesting consistency, injectivity scans, and
perturbation (genericity and stability) experiments.
"""
from .apps import (
    LocationInstance,
    LocationReport,
    PhenotypicReport,
    RidgeInstance,
    RidgePathReport,
    location_pareto_set,
    phenotypic_pareto_set,
    ridge_lambda,
    ridge_path,
    write_ridge_csv,
)
from .atlas import (
    ParetoAtlas,
    SimplexGrid,
    build_atlas,
    face_consistency,
    injectivity_scan,
)
from .diagnostics import (
    DEFAULT_RANK_TOL,
    CorankCertificate,
    FoldReport,
    NoRegularMinor,
    NotCorankOne,
    RankReport,
    certify_corank_on_atlas,
    cokernel_alignment,
    cokernel_basis,
    corank_at,
    fold_check,
    rank_report,
)
from .ordering import dominates, dominating_pairs, mutually_nondominated
from .perturb import (
    LinearPerturbation,
    PerturbedProblem,
    corank2_system,
    corank2_tracker,
    genericity_experiment,
    perturb_problem,
    stability_experiment,
)
from .problems import (
    BUILTIN_NAMES,
    DistanceSquared,
    Example31,
    Example31Perturbed,
    Example32,
    GenericQuadratic,
    ObjectiveProblem,
    Phenotypic,
    ProblemFormatError,
    RemarkG,
    RidgePair,
    Weight,
    build_problem,
    builtin_problem,
    check_strong_convexity,
    parse_problem,
    restrict,
    serialize_problem,
)
from .solver import (
    MaxIterExceeded,
    ParetoPoint,
    SingularNewtonSystem,
    SolverConfig,
    SolverError,
    minimize_weighted,
    scalarize,
    subproblem_solve,
    x_star_derivative,
)

__version__ = "0.1.0"
