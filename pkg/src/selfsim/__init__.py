"""Solver and verification suite for eternal self-similar profiles of
singular diffusion with critical gradient absorption.

Submodules:
    params    problem instance and closed-form constants
    profile   shooting ODE integration with event detection
    classify  trichotomy decision procedure and critical-beta bisection
    phiplane  first-order phase-plane reduction and asymptotic fits
    residual  space-time evaluation and finite-difference PDE residual
    io        CSV/JSON export and the bisection cache
    cli       command-line entry point
"""

__version__ = "0.1.0"

from .classify import (
    BisectionReport,
    BracketError,
    Classification,
    Verdict,
    classify,
    find_beta_star,
    solve_limit_profile,
)
from .params import (
    ExpansionCoeffs,
    Params,
    ParamsError,
    TheoryConstants,
    expansion_coeffs,
    make_params,
    theory_constants,
)
from .phiplane import (
    PhiIntegrityError,
    PhiOptions,
    PhiRegime,
    PhiSolution,
    TailFit,
    TailKind,
    check_phi_bounds,
    fit_tail,
    phi_bound_violations,
    phi_from_profile,
    solve_phi,
)
from .profile import (
    IntegratorOptions,
    ProfileRangeError,
    ProfileSolution,
    SeriesRangeError,
    StepFailureError,
    Termination,
    integrate_profile,
    series_eval,
)
from .residual import (
    EvalRangeError,
    ResidualGrid,
    SelfSimilarSpec,
    decay_report,
    eval_U,
    pde_residual,
    profile_options_for,
    selfsim_spec,
)

__all__ = [
    "__version__",
    "BisectionReport",
    "BracketError",
    "Classification",
    "EvalRangeError",
    "ExpansionCoeffs",
    "IntegratorOptions",
    "Params",
    "ParamsError",
    "PhiIntegrityError",
    "PhiOptions",
    "PhiRegime",
    "PhiSolution",
    "ProfileRangeError",
    "ProfileSolution",
    "ResidualGrid",
    "SelfSimilarSpec",
    "SeriesRangeError",
    "StepFailureError",
    "TailFit",
    "TailKind",
    "Termination",
    "TheoryConstants",
    "Verdict",
    "check_phi_bounds",
    "classify",
    "decay_report",
    "eval_U",
    "expansion_coeffs",
    "find_beta_star",
    "fit_tail",
    "integrate_profile",
    "make_params",
    "pde_residual",
    "phi_bound_violations",
    "phi_from_profile",
    "profile_options_for",
    "selfsim_spec",
    "series_eval",
    "solve_limit_profile",
    "solve_phi",
    "theory_constants",
]
