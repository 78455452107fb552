"""Implicit-midpoint time stepping with implicit trace parameters.

Per step: solve the coupled half-step system at ``t_n + dt/2``, extrapolate
``u^{n+1} = 2 u^{n+1/2} - u^n``, recover ``q^{n+1}`` from the gradient
equation and ``(p^{n+1}, tau^{n+1})`` from the post-step subsystem.  The
time derivative of the interface jumps in the Hamiltonian constraint is a
three-point backward difference; the first step uses the nonuniform stencil
``0, (dt/2)^2, dt/2`` primed by one backward Euler solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import OperatorSet, build_operators, l2_project
from .conservation import (
    InvariantRecord,
    TraceParams,
    energy,
    hamiltonian,
    lemma_condition_residuals,
    mass,
)
from .mesh import Mesh, gauss_rule, legendre_vander
from .problems import ProblemSpec
from .solver import (
    HalfStepSystem,
    JumpClosure,
    SolverConfig,
    SolverError,
    State,
    solve_gradient,
    solve_halfstep,
    solve_poststep,
)

log = logging.getLogger(__name__)


class StepFailure(SolverError):
    def __init__(self, step: int, t: float, cause: Exception):
        super().__init__(f"step {step} (t={t:.6g}) failed: {cause}")
        self.step = step
        self.t = t
        self.cause = cause


def uniform_jump_t(prev_half: np.ndarray, current: np.ndarray, dt: float) -> JumpClosure:
    """Backward three-point closure on levels ``t - dt, t - dt/2, t``.

    ``[u]_t = ([u]^{n-1/2} - 4 [u]^n + 3 [u]^{n+1/2}) / dt``.
    """
    return JumpClosure(3.0 / dt, (np.asarray(prev_half) - 4.0 * np.asarray(current)) / dt)


def nonuniform_coefficients(dt: float) -> tuple[float, float, float]:
    """Weights for levels ``0, (dt/2)^2, dt/2``, derivative taken at ``dt/2``."""
    s = 0.5 * dt
    if s == 1.0:
        raise ZeroDivisionError("nonuniform stencil is singular at dt = 2")
    c1 = (1.0 - s) / s**2
    c2 = -1.0 / (s**2 * (1.0 - s))
    c3 = (2.0 - s) / (s * (1.0 - s))
    return c1, c2, c3


def nonuniform_jump_t(j0: np.ndarray, j_quarter: np.ndarray, dt: float) -> JumpClosure:
    c1, c2, c3 = nonuniform_coefficients(dt)
    return JumpClosure(c3, c1 * np.asarray(j0) + c2 * np.asarray(j_quarter))


@dataclass
class StepHistory:
    """Jump vectors at recent time levels, oldest first."""

    times: list = field(default_factory=list)
    jumps: list = field(default_factory=list)

    def push(self, t: float, j: np.ndarray, keep: int = 3) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("history times must increase")
        self.times.append(float(t))
        self.jumps.append(np.asarray(j, dtype=float).copy())
        del self.times[:-keep], self.jumps[:-keep]


@dataclass
class RunState:
    problem: ProblemSpec
    ops: OperatorSet
    dt: float
    t: float
    step: int
    u: np.ndarray
    q: np.ndarray
    p: np.ndarray
    taus: TraceParams
    history: StepHistory
    records: list = field(default_factory=list)
    newton_iterations: list = field(default_factory=list)
    half: State | None = None
    prev_half_u: np.ndarray | None = None


def _project_source(problem: ProblemSpec, ops: OperatorSet, t: float):
    if problem.g is None:
        return None
    return l2_project(lambda x: problem.g(x, t), ops.mesh, ops.k)


def _record(state: RunState, closure: JumpClosure, half_residuals=(0.0, 0.0)) -> InvariantRecord:
    pr, ops = state.problem, state.ops
    post = lemma_condition_residuals(
        ops, state.u, state.q, state.p, state.taus,
        closure(ops.jumps(state.u)), pr.eps, pr.f, pr.V,
    )
    return InvariantRecord(
        t=state.t,
        mass=mass(ops, state.u),
        energy=energy(ops, state.u),
        hamiltonian=hamiltonian(ops, state.u, state.q, pr.eps, pr.V),
        tau_qu=state.taus.tau_qu,
        tau_pu=state.taus.tau_pu,
        energy_residual=post[0],
        hamiltonian_residual=post[1],
        half_energy_residual=half_residuals[0],
        half_hamiltonian_residual=half_residuals[1],
    )


def startup(problem: ProblemSpec, mesh: Mesh, k: int, dt: float,
            cfg: SolverConfig = SolverConfig(), ops: OperatorSet | None = None) -> RunState:
    """Project ``u0`` and prime the jump history with a backward Euler solve."""
    if not 0.0 < dt < 2.0:
        raise ValueError(f"need 0 < dt < 2 for the startup stencil, got {dt}")
    ops = ops or build_operators(mesh, k)
    pr = problem
    u0 = l2_project(pr.u0, mesh, k)
    q0 = solve_gradient(ops, u0)
    p0 = (ops.moments(pr.f(ops.at_quadrature(u0))) - pr.eps * (ops.DA @ q0)) / ops.mass_diag
    j0 = ops.jumps(u0)

    delta = (0.5 * dt) ** 2
    be = HalfStepSystem(
        ops, pr.eps, pr.f, pr.fprime, pr.V, delta, u0,
        JumpClosure(1.0 / delta, -j0 / delta),
        _project_source(pr, ops, delta),
    )
    be_state, _, _ = solve_halfstep(be, State(u0, q0, p0), cfg)
    j_quarter = ops.jumps(be_state.u)

    history = StepHistory()
    history.push(0.0, j0)
    history.push(delta, j_quarter)

    # forward difference over the startup interval for the tau at t = 0
    closure0 = JumpClosure(0.0, (j_quarter - j0) / delta)
    p0, taus0 = solve_poststep(ops, pr.eps, u0, q0, closure0, pr.f, pr.V, cfg)
    state = RunState(pr, ops, dt, 0.0, 0, u0, q0, p0, taus0, history)
    state.records.append(_record(state, closure0))
    return state


def advance(state: RunState, cfg: SolverConfig = SolverConfig()) -> RunState:
    """One implicit-midpoint step; mutates and returns ``state``."""
    pr, ops, dt = state.problem, state.ops, state.dt
    hist = state.history
    t_half = state.t + 0.5 * dt
    j_n = ops.jumps(state.u)

    if state.step == 0:
        closure = nonuniform_jump_t(hist.jumps[0], hist.jumps[1], dt)
    else:
        closure = uniform_jump_t(hist.jumps[-2], j_n, dt)

    sys = HalfStepSystem.midpoint(
        ops, pr.eps, pr.f, pr.fprime, pr.V, dt, state.u, closure,
        _project_source(pr, ops, t_half),
    )
    # Whole-step values carry the undamped stiff modes of the midpoint rule
    # with alternating sign, so extrapolate along the smoother half levels.
    if state.prev_half_u is not None:
        u_guess = 2.0 * state.half.u - state.prev_half_u
    else:
        u_guess = state.u if state.half is None else state.half.u
    # the previous tau selects the root branch (tau = 0 on the first step)
    taus0 = state.half.taus if state.half is not None else TraceParams()
    try:
        half, it_half, _ = solve_halfstep(sys, State(u_guess, state.q, state.p, taus0), cfg)
    except SolverError as exc:
        raise StepFailure(state.step, state.t, exc) from exc
    half_res = lemma_condition_residuals(
        ops, half.u, half.q, half.p, half.taus,
        closure(ops.jumps(half.u)), pr.eps, pr.f, pr.V,
    )

    u_new = 2.0 * half.u - state.u
    q_new = solve_gradient(ops, u_new)
    j_half = ops.jumps(half.u)
    post_closure = uniform_jump_t(j_n, j_half, dt)
    try:
        p_new, taus_new = solve_poststep(ops, pr.eps, u_new, q_new, post_closure, pr.f, pr.V, cfg)
    except SolverError as exc:
        raise StepFailure(state.step, state.t, exc) from exc

    hist.push(t_half, j_half)
    hist.push(state.t + dt, ops.jumps(u_new))
    state.u, state.q, state.p, state.taus = u_new, q_new, p_new, taus_new
    state.prev_half_u = None if state.half is None else state.half.u
    state.half = half
    state.step += 1
    state.t = state.step * dt
    state.newton_iterations.append(it_half)
    state.records.append(_record(state, post_closure, half_res))
    return state


def step_count(T: float, dt: float) -> int:
    if T < 0:
        raise ValueError("final time must be non-negative")
    if T == 0:
        return 0
    return max(1, int(math.floor(T / dt + 0.5)))


def l2_error(ops: OperatorSet, coeffs: np.ndarray, exact, n_q: int = 10) -> float:
    """``||w_h - w||`` with a fixed Gauss rule per element."""
    rule = gauss_rule(n_q)
    x = ops.mesh.to_physical(rule.nodes)
    wh = coeffs.reshape(ops.N, ops.k + 1) @ legendre_vander(ops.k, rule.nodes).T
    err = (wh - exact(x)) ** 2
    return float(np.sqrt(np.sum(0.5 * ops.mesh.sizes[:, None] * err * rule.weights)))


@dataclass
class RunResult:
    state: RunState
    records: list
    errors: dict | None

    @property
    def max_constraint_residual(self) -> float:
        return max(
            max(abs(r.energy_residual), abs(r.hamiltonian_residual),
                abs(r.half_energy_residual), abs(r.half_hamiltonian_residual))
            for r in self.records
        )


def solution_errors(state: RunState) -> dict | None:
    exact = state.problem.exact
    if exact is None:
        return None
    t = state.t
    return {
        name: l2_error(state.ops, coeffs, lambda x, i=i: exact(x, t)[i])
        for i, (name, coeffs) in enumerate((("u", state.u), ("q", state.q), ("p", state.p)))
    }


def run(problem: ProblemSpec, mesh: Mesh, k: int, dt: float, T: float,
        cfg: SolverConfig = SolverConfig(), callback=None) -> RunResult:
    """Integrate to ``T`` with ``round(T/dt)`` uniform steps of size ``T/steps``."""
    steps = step_count(T, dt)
    dt_eff = T / steps if steps else dt
    state = startup(problem, mesh, k, dt_eff, cfg)
    for _ in range(steps):
        advance(state, cfg)
        if callback is not None:
            callback(state)
    return RunResult(state, state.records, solution_errors(state))
