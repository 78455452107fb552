"""Discontinuous Galerkin solver for ``u_t + eps u_xxx + f(u)_x = g`` that
conserves mass, energy and the Hamiltonian by treating the two trace
penalties as unknowns."""

from .assembly import OperatorSet, build_operators, l2_project
from .conservation import (
    DegenerateTraceError,
    InvariantRecord,
    TraceParams,
    closed_form_taus,
    energy,
    eta,
    hamiltonian,
    lemma_condition_residuals,
    mass,
    v_f,
)
from .integrator import RunResult, RunState, StepFailure, advance, l2_error, run, startup
from .mesh import Mesh, QuadratureRule, build_uniform_mesh, gauss_rule, legendre_eval
from .problems import (
    CnoidalWave,
    ProblemSpec,
    cnoidal_problem,
    constant_problem,
    get_problem,
    linear_problem,
    nonlinear_problem,
)
from .solver import (
    HalfStepSystem,
    JumpClosure,
    NoConvergenceError,
    SolverConfig,
    SolverError,
    State,
    eliminate_traces,
    jacobian,
    residual,
    solve_halfstep,
    solve_poststep,
)
from .special import elliptic_K, jacobi_cn, jacobi_dn, jacobi_sn, jacobi_sncndn

__version__ = "0.1.0"
