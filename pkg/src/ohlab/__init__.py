"""Solvers and estimate audits for the Ostrovsky-Hunter equation on the half-line.

The package is organised around one model problem,

    u_t + u u_x = gamma * P,    P_x = u,    P(t, 0) = 0,
    u(t, 0) = g(t),             u(0, x) = u0(x),

posed for x > 0 and truncated to (0, L) for computation.  Two solvers are
provided: a vanishing-viscosity regularisation marched by method of lines
(`ohlab.viscous`) and a Godunov finite-volume scheme for the inviscid limit
(`ohlab.inviscid`).  `ohlab.analysis` audits computed trajectories against
entropy inequalities, boundary admissibility and a priori bounds, and
`ohlab.lab` orchestrates experiments from config files and the CLI.
"""

from ohlab.core import (
    BlowUpError,
    BoundarySignal,
    CutoffChi,
    Grid1D,
    ProblemSpec,
    ScalarField,
    StepFailureError,
    Trajectory,
    TruncationGuardError,
    make_cutoff,
    make_grid,
    norm_l1,
    norm_l2,
    norm_linf,
    validate_spec,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "BoundarySignal",
    "CutoffChi",
    "Grid1D",
    "ProblemSpec",
    "ScalarField",
    "StepFailureError",
    "Trajectory",
    "TruncationGuardError",
    "make_cutoff",
    "make_grid",
    "norm_l1",
    "norm_l2",
    "norm_linf",
    "validate_spec",
    "__version__",
]
