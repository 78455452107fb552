"""Coupled DG system for ``(u, q, p, tau_qu, tau_pu)`` and its Newton solver.

For one implicit stage with step coefficient ``theta`` (``dt/2`` for the
midpoint half step, the full step for backward Euler) the residual blocks are

    F1 = M q + (D+A) u
    F2 = M p + eps (D+A) q - eps tau_qu J u - M Pi f(u)
    F3 = M u - theta (D+A) p + theta tau_pu J u - M u_prev - theta M g
    F4 = V_f(u) - tau_pu eta(u,u) + eps tau_qu eta(q,u)
    F5 = tau_pu eta(p,u) + eps tau_qu sum [u] [u]_t

with ``[u]_t`` closed by the affine rule ``[u]_t = a [u] + b`` supplied by
the time integrator.  F4 and F5 are the energy and Hamiltonian constraints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .assembly import OperatorSet
from .conservation import DegenerateTraceError, TraceParams, projected_flux, v_f

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NoConvergenceError(SolverError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularJacobianError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-12
    max_iters: int = 30
    degeneracy_threshold: float = 1e-12
    degeneracy_floor: float = 1e-14
    line_search: bool = True
    max_backtracks: int = 20
    # a stalled line search is accepted below this multiple of the tolerance
    stall_factor: float = 100.0
    # scalar continuation in tau_qu when the projected Newton fails
    tau_fallback: bool = True
    tau_search_step: float = 0.05
    tau_search_radius: float = 10.0

    def __post_init__(self):
        if self.tol_residual <= 0 or self.max_iters < 1:
            raise ValueError("need tol_residual > 0 and max_iters >= 1")


@dataclass(frozen=True)
class JumpClosure:
    """Affine closure ``[u]_t = a [u] + b`` at the nodes."""

    a: float
    b: np.ndarray

    def __call__(self, jumps: np.ndarray) -> np.ndarray:
        return self.a * jumps + self.b


@dataclass(frozen=True)
class HalfStepSystem:
    ops: OperatorSet
    eps: float
    f: object
    fprime: object
    V: object
    theta: float
    u_prev: np.ndarray
    closure: JumpClosure
    g_proj: np.ndarray | None = None

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("time step must be positive")
        if self.u_prev.shape != (self.ops.ndof,):
            raise ValueError("u_prev does not match the operator size")

    @classmethod
    def midpoint(cls, ops, eps, f, fprime, V, dt, u_prev, closure, g_proj=None):
        return cls(ops, eps, f, fprime, V, 0.5 * dt, u_prev, closure, g_proj)

    @property
    def size(self) -> int:
        return 3 * self.ops.ndof + 2


@dataclass
class State:
    u: np.ndarray
    q: np.ndarray
    p: np.ndarray
    taus: TraceParams = field(default_factory=TraceParams)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.u, self.q, self.p, [self.taus.tau_qu, self.taus.tau_pu]])

    @classmethod
    def unpack(cls, x: np.ndarray, n: int) -> "State":
        return cls(
            x[:n].copy(),
            x[n:2 * n].copy(),
            x[2 * n:3 * n].copy(),
            TraceParams(float(x[3 * n]), float(x[3 * n + 1])),
        )

    def copy(self) -> "State":
        return State(self.u.copy(), self.q.copy(), self.p.copy(), self.taus)


def is_degenerate(ops: OperatorSet, u: np.ndarray, cfg: SolverConfig) -> bool:
    """True when u has (numerically) no jumps, so any tau meets the constraints."""
    ju = ops.jumps(u)
    scale = float(u @ (ops.mass_diag * u))
    return float(ju @ ju) < max(cfg.degeneracy_threshold * scale, cfg.degeneracy_floor)


def flux_moment_jacobian(ops: OperatorSet, u: np.ndarray, fprime) -> np.ndarray:
    """Derivative of ``M Pi f(u)`` (the moments of ``f(u_h)``) w.r.t. ``u``."""
    uq = ops.at_quadrature(u)
    w = ops.quad.weights * fprime(uq)
    half_h = 0.5 * ops.mesh.sizes
    blocks = [hh * (ops.vander.T * wi) @ ops.vander for hh, wi in zip(half_h, w)]
    return sla.block_diag(*blocks)


def v_f_gradient(ops: OperatorSet, u: np.ndarray, f, fprime) -> np.ndarray:
    u_minus = ops.trace_minus @ u
    u_plus = ops.trace_plus @ u
    ju = u_minus - u_plus
    avg_flux = ops.averages(projected_flux(ops, u, f))
    dcoef = flux_moment_jacobian(ops, u, fprime) / ops.mass_diag[:, None]
    return (
        f(u_minus) @ ops.trace_minus
        - f(u_plus) @ ops.trace_plus
        - (ju @ ops.avg_op) @ dcoef
        - avg_flux @ ops.jump_op
    )


def residual(sys: HalfStepSystem, state: State) -> np.ndarray:
    ops, eps, th = sys.ops, sys.eps, sys.theta
    u, q, p = state.u, state.q, state.p
    tq, tp = state.taus.tau_qu, state.taus.tau_pu
    Md = ops.mass_diag
    Ju = ops.J @ u
    ju = ops.jumps(u)
    g = 0.0 if sys.g_proj is None else Md * sys.g_proj
    F1 = Md * q + ops.DA @ u
    F2 = Md * p + eps * (ops.DA @ q) - eps * tq * Ju - ops.moments(sys.f(ops.at_quadrature(u)))
    F3 = Md * (u - sys.u_prev) - th * (ops.DA @ p) + th * tp * Ju - th * g
    F4 = v_f(ops, u, sys.f, sys.V) - tp * (ju @ ju) + eps * tq * (ops.jumps(q) @ ju)
    F5 = tp * (ops.jumps(p) @ ju) + eps * tq * (ju @ sys.closure(ju))
    return np.concatenate([F1, F2, F3, [F4, F5]])


def jacobian(sys: HalfStepSystem, state: State) -> np.ndarray:
    ops, eps, th = sys.ops, sys.eps, sys.theta
    n = ops.ndof
    u, q, p = state.u, state.q, state.p
    tq, tp = state.taus.tau_qu, state.taus.tau_pu
    M, DA, J = ops.M, ops.DA, ops.J
    Ju, Jq, Jp = J @ u, J @ q, J @ p
    ju = ops.jumps(u)
    a, b = sys.closure.a, sys.closure.b

    Jac = np.zeros((3 * n + 2, 3 * n + 2))
    U, Q, P = slice(0, n), slice(n, 2 * n), slice(2 * n, 3 * n)
    TQ, TP = 3 * n, 3 * n + 1

    Jac[U, U] = DA
    Jac[U, Q] = M

    Jac[Q, U] = -eps * tq * J - flux_moment_jacobian(ops, u, sys.fprime)
    Jac[Q, Q] = eps * DA
    Jac[Q, P] = M
    Jac[Q, TQ] = -eps * Ju

    Jac[P, U] = M + th * tp * J
    Jac[P, P] = -th * DA
    Jac[P, TP] = th * Ju

    Jac[TQ, U] = v_f_gradient(ops, u, sys.f, sys.fprime) - 2.0 * tp * Ju + eps * tq * Jq
    Jac[TQ, Q] = eps * tq * Ju
    Jac[TQ, TQ] = eps * (q @ Ju)
    Jac[TQ, TP] = -(u @ Ju)

    Jac[TP, U] = tp * Jp + eps * tq * (2.0 * a * Ju + b @ ops.jump_op)
    Jac[TP, P] = tp * Ju
    Jac[TP, TQ] = eps * (a * (u @ Ju) + b @ ju)
    Jac[TP, TP] = p @ Ju
    return Jac


def eliminate_traces(ops: OperatorSet, eps: float, u: np.ndarray, q: np.ndarray,
                     closure: JumpClosure, f, V, cfg: SolverConfig = SolverConfig(),
                     strict: bool = True, tau_ref: float | None = None):
    """Solve F2, F4, F5 for ``(p, tau_qu, tau_pu)`` with ``u`` and ``q`` fixed.

    F2 makes ``p`` affine in ``tau_qu`` and F4 gives ``tau_pu``; F5 is then
    a quadratic in ``tau_qu``.  Of its two roots we keep the one nearest
    ``tau_ref`` or, without a reference, the one that vanishes with ``V_f``
    (computed in the cancellation-free form).  Without
    real roots, ``strict=False`` returns the vertex, which minimises the F5
    violation; otherwise :class:`DegenerateTraceError` is raised.
    """
    Md = ops.mass_diag
    p0 = (ops.moments(f(ops.at_quadrature(u))) - eps * (ops.DA @ q)) / Md
    if is_degenerate(ops, u, cfg):
        return p0, TraceParams()
    p1 = eps * (ops.J @ u) / Md
    ju = ops.jumps(u)
    e_uu = float(ju @ ju)
    e_qu = float(ops.jumps(q) @ ju)
    e_p0 = float(ops.jumps(p0) @ ju)
    e_p1 = float(ops.jumps(p1) @ ju)
    e_tu = float(closure(ju) @ ju)
    vf = v_f(ops, u, f, V)

    A = eps * e_qu * e_p1
    B = vf * e_p1 + eps * e_qu * e_p0 + eps * e_tu * e_uu
    C = vf * e_p0
    disc = B * B - 4.0 * A * C
    den = B + math.copysign(math.sqrt(max(disc, 0.0)), B)
    if disc < -1e-12 * B * B:
        if strict:
            raise DegenerateTraceError("trace constraints have no real solution")
        tau_qu = -B / (2.0 * A)
    elif den != 0.0:
        tau_qu = -2.0 * C / den
        if tau_ref is not None and A != 0.0:
            other = -den / (2.0 * A)
            if abs(other - tau_ref) < abs(tau_qu - tau_ref):
                tau_qu = other
    elif C == 0.0:
        tau_qu = 0.0
    else:
        raise DegenerateTraceError("trace constraints have no finite solution")
    # F4 and F5 both give tau_pu; take the one with less cancellation
    tau_pu = (vf + eps * tau_qu * e_qu) / e_uu
    err4 = (abs(vf) + abs(eps * tau_qu * e_qu)) / e_uu
    e_pu = e_p0 + tau_qu * e_p1
    if e_pu != 0.0:
        alt = -eps * tau_qu * e_tu / e_pu
        err5 = abs(alt) * (abs(e_p0) + abs(tau_qu * e_p1)) / abs(e_pu)
        if err5 < err4:
            tau_pu = alt
    return p0 + tau_qu * p1, TraceParams(tau_qu, tau_pu)


def _pin_degenerate(F: np.ndarray, Jac: np.ndarray | None, x: np.ndarray) -> None:
    """Replace the two constraint rows by ``tau_qu = 0``, ``tau_pu = 0``."""
    F[-2:] = x[-2:]
    if Jac is not None:
        Jac[-2:, :] = 0.0
        Jac[-2, -2] = Jac[-1, -1] = 1.0


def _newton(fun, jac, project, x0, cfg: SolverConfig, label: str):
    """Damped Newton on ``fun(x) = 0`` with every iterate mapped through ``project``.

    ``project`` returns ``None`` for points it cannot map; the line search
    then shortens the step.
    """
    x = project(x0)
    if x is None:
        raise NoConvergenceError(f"{label}: initial guess is infeasible", 0, np.inf)
    F = fun(x)
    res = float(np.max(np.abs(F)))
    history = [res]
    it = 0
    while res > cfg.tol_residual:
        if it >= cfg.max_iters:
            raise NoConvergenceError(
                f"{label}: no convergence after {it} iterations (residual {res:.3e})",
                iterations=it, residual=res,
            )
        try:
            lu = sla.lu_factor(jac(x), check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularJacobianError(f"{label}: {exc}") from exc
        if np.any(np.abs(np.diag(lu[0])) == 0.0):
            raise SingularJacobianError(f"{label}: singular Jacobian")
        dx = -sla.lu_solve(lu, F)
        it += 1

        norm0 = float(np.linalg.norm(F))
        lam = 1.0
        for _ in range(cfg.max_backtracks + 1 if cfg.line_search else 1):
            x_try = project(x + lam * dx)
            if x_try is not None:
                F_try = fun(x_try)
                if not cfg.line_search or np.linalg.norm(F_try) <= (1.0 - 1e-4 * lam) * norm0:
                    break
            lam *= 0.5
        else:
            if res <= cfg.stall_factor * cfg.tol_residual:
                log.debug("%s: stalled at residual %.3e, accepted", label, res)
                break
            raise NoConvergenceError(
                f"{label}: line search failed at residual {res:.3e}",
                iterations=it, residual=res,
            )
        if x_try is None:
            raise NoConvergenceError(f"{label}: no feasible step", iterations=it, residual=res)
        x, F = x_try, F_try
        res = float(np.max(np.abs(F)))
        history.append(res)
    return x, it, history


def solve_halfstep(sys: HalfStepSystem, initial_guess: State, cfg: SolverConfig = SolverConfig()):
    """Solve F1..F5 for ``(u, q, p, tau)``.

    Newton runs on the full system, but after each update ``q``, ``p`` and the
    trace parameters are recomputed from ``u`` by :func:`eliminate_traces`,
    which keeps the root branch nearest the guessed ``tau_qu``.  Only F3 is
    then left to converge.  Near a fold of the constraint pair this map is
    too steep for Newton and :func:`solve_halfstep_tau_scan` takes over.

    Returns ``(state, iterations, residual_history)``.
    """
    ops = sys.ops
    n = ops.ndof

    def project(x):
        u = x[:n]
        q = solve_gradient(ops, u)
        try:
            p, taus = eliminate_traces(ops, sys.eps, u, q, sys.closure, sys.f, sys.V, cfg,
                                       tau_ref=float(x[3 * n]))
        except DegenerateTraceError:
            return None
        return State(u.copy(), q, p, taus).pack()

    def fun(x):
        return residual(sys, State.unpack(x, n))

    def jac(x):
        st = State.unpack(x, n)
        Jc = jacobian(sys, st)
        if is_degenerate(ops, st.u, cfg):
            _pin_degenerate(np.zeros(2), Jc, x)
        return Jc

    try:
        x, it, hist = _newton(fun, jac, project, initial_guess.pack(), cfg, "half step")
    except SolverError as exc:
        if not cfg.tau_fallback or is_degenerate(ops, initial_guess.u, cfg):
            raise
        log.debug("projected Newton failed (%s); scanning tau_qu", exc)
        return solve_halfstep_tau_scan(sys, initial_guess, cfg)
    return State.unpack(x, n), it, hist


def solve_halfstep_tau_scan(sys: HalfStepSystem, guess: State, cfg: SolverConfig = SolverConfig()):
    """Half step as a scalar equation ``F5(tau_qu) = 0``.

    For fixed ``tau_qu`` the rows F1..F4 are solved for ``(u, q, p, tau_pu)``
    by Newton, which is well conditioned.  A root of the remaining scalar F5
    is bracketed outwards from ``guess.taus.tau_qu`` and refined with Brent's
    method.  If no sign change is found within the search radius the pair
    has no solution nearby; then ``|F5|`` is minimised instead and the
    violation is left in the returned state for the caller to record.
    """
    ops = sys.ops
    n = ops.ndof
    rows = np.r_[0:3 * n + 1]
    cols = np.r_[0:3 * n, 3 * n + 1]
    cache = {"x": guess.pack(), "evals": 0}

    def inner(tq):
        x = cache["x"].copy()
        x[3 * n] = tq

        def fun(y):
            z = x.copy()
            z[cols] = y
            return residual(sys, State.unpack(z, n))[rows]

        def jac(y):
            z = x.copy()
            z[cols] = y
            return jacobian(sys, State.unpack(z, n))[np.ix_(rows, cols)]

        y, _, _ = _newton(fun, jac, lambda y: y, x[cols], cfg, "half step (fixed tau_qu)")
        x[cols] = y
        cache["x"] = x
        cache["evals"] += 1
        return x

    def g(tq):
        return float(residual(sys, State.unpack(inner(tq), n))[-1])

    t0 = guess.taus.tau_qu
    g0 = g(t0)
    samples = [(t0, g0)]
    bracket = None
    if abs(g0) > cfg.tol_residual:
        width = max(1.0, abs(t0))
        d = cfg.tau_search_step * width
        last = {+1: (t0, g0), -1: (t0, g0)}
        live = {+1: True, -1: True}
        while bracket is None and d <= cfg.tau_search_radius * width and any(live.values()):
            for side in (+1, -1):
                if not live[side]:
                    continue
                t = t0 + side * d
                try:
                    gt = g(t)
                except SolverError:
                    live[side] = False
                    continue
                samples.append((t, gt))
                tp, gp = last[side]
                if np.sign(gt) != np.sign(gp):
                    bracket = (min(t, tp), max(t, tp))
                    break
                last[side] = (t, gt)
            d *= 2.0

    if abs(g0) <= cfg.tol_residual:
        t_star = t0
    elif bracket is not None:
        t_star = optimize.brentq(g, *bracket, xtol=1e-14 * max(1.0, abs(bracket[0])),
                                 rtol=4.0 * np.finfo(float).eps, maxiter=200)
    else:
        samples.sort()
        i = min(range(len(samples)), key=lambda j: abs(samples[j][1]))
        lo = samples[max(i - 1, 0)][0]
        hi = samples[min(i + 1, len(samples) - 1)][0]
        t_star = optimize.minimize_scalar(
            lambda t: abs(g(t)), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12 * max(1.0, abs(samples[i][0]))},
        ).x
        log.info("Hamiltonian constraint has no root near tau_qu=%.4g; "
                    "least violation %.3e at tau_qu=%.4g", t0, abs(g(t_star)), t_star)
    x = inner(float(t_star))
    F = residual(sys, State.unpack(x, n))
    return State.unpack(x, n), cache["evals"], [float(np.max(np.abs(F)))]


def solve_gradient(ops: OperatorSet, u: np.ndarray) -> np.ndarray:
    """``q`` from ``M q + (D+A) u = 0``."""
    return -(ops.DA @ u) / ops.mass_diag


def solve_poststep(
    ops: OperatorSet,
    eps: float,
    u: np.ndarray,
    q: np.ndarray,
    closure: JumpClosure,
    f,
    V,
    cfg: SolverConfig = SolverConfig(),
):
    """``(p, TraceParams)`` at a whole step from the fixed ``u`` and ``q``.

    These values are diagnostics only (nothing downstream depends on them),
    so a constraint pair without real roots falls back to the least-violating
    trace parameters; the remaining violation shows up in the recorded
    whole-step residuals.
    """
    try:
        return eliminate_traces(ops, eps, u, q, closure, f, V, cfg, strict=False)
    except DegenerateTraceError as exc:
        raise SolverError(f"post step: {exc}") from exc
