"""Penalty and active-set solvers for doubly nonlinear parabolic systems with a unilateral constraint."""

from ._core import (
    CheckEntry,
    EvalError,
    InvalidArgument,
    Mesh,
    ParseError,
    ProblemSpec,
    SolverError,
    Trajectory,
    ValidationReport,
    __version__,
    active_set,
    check_A4,
    complementarity,
    energy,
    l2qt_distance,
    legendre_psi,
    load_problem,
    make_mesh,
    oracle_compare,
    parse_problem,
    penalty_residual,
    run_cli,
    solve,
    spatial_study,
    sweep,
    validate,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
