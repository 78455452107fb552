"""Jump functionals, the invariants, and the trace-parameter constraints.

All boundary sums run over the nodes ``x_1 .. x_N``; the periodic node
``x_0 = x_N`` is counted once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import OperatorSet


class DegenerateTraceError(ArithmeticError):
    """The closed-form trace parameters are undefined (vanishing denominator)."""


@dataclass(frozen=True)
class TraceParams:
    tau_qu: float = 0.0
    tau_pu: float = 0.0


@dataclass(frozen=True)
class InvariantRecord:
    t: float
    mass: float
    energy: float
    hamiltonian: float
    tau_qu: float
    tau_pu: float
    energy_residual: float = 0.0
    hamiltonian_residual: float = 0.0
    half_energy_residual: float = 0.0
    half_hamiltonian_residual: float = 0.0


def eta(ops: OperatorSet, w: np.ndarray, v: np.ndarray) -> float:
    """``sum_i [w](x_i) [v](x_i)``."""
    return float(ops.jumps(w) @ ops.jumps(v))


def projected_flux(ops: OperatorSet, u: np.ndarray, f) -> np.ndarray:
    """Coefficients of the L2 projection of ``f(u_h)``."""
    return ops.project_values(f(ops.at_quadrature(u)))


def v_f(ops: OperatorSet, u: np.ndarray, f, V) -> float:
    """``sum_i ([V(u_h)] - {Pi f(u_h)} [u_h])(x_i)``."""
    u_minus = ops.trace_minus @ u
    u_plus = ops.trace_plus @ u
    flux_avg = ops.averages(projected_flux(ops, u, f))
    return float(np.sum(V(u_minus) - V(u_plus) - flux_avg * (u_minus - u_plus)))


def mass(ops: OperatorSet, u: np.ndarray) -> float:
    return float(ops.mesh.sizes @ u.reshape(ops.N, ops.k + 1)[:, 0])


def energy(ops: OperatorSet, u: np.ndarray) -> float:
    return float(u @ (ops.mass_diag * u))


def hamiltonian(ops: OperatorSet, u: np.ndarray, q: np.ndarray, eps: float, V) -> float:
    """``int (eps/2 q_h^2 - V(u_h)) dx``."""
    return 0.5 * eps * energy(ops, q) - ops.integrate(V(ops.at_quadrature(u)))


def closed_form_taus_from_sums(
    eta_qu: float,
    eta_pu: float,
    eta_tu: float,
    eta_uu: float,
    vf_sum: float,
    eps: float,
) -> TraceParams:
    """Eliminate the two constraints for ``(tau_qu, tau_pu)``.

    ``eta_tu`` is ``sum [u]_t [u]``.  Raises :class:`DegenerateTraceError`
    when the elimination divides by (numerically) zero.
    """
    den = eta_qu * eta_pu + eta_tu * eta_uu
    scale = abs(eta_qu * eta_pu) + abs(eta_tu * eta_uu)
    if scale == 0.0 or abs(den) < 1e-12 * scale:
        raise DegenerateTraceError("vanishing denominator in the tau elimination")
    tau_qu = -eta_pu * vf_sum / (eps * den)
    if abs(eta_pu) > 1e-8 * abs(eta_uu) and eta_pu != 0.0:
        tau_pu = -eps * eta_tu / eta_pu * tau_qu
    elif eta_uu != 0.0:
        # same constraint pair, eliminated through the energy equation instead
        tau_pu = (vf_sum + eps * tau_qu * eta_qu) / eta_uu
    else:
        raise DegenerateTraceError("no jumps in u")
    return TraceParams(tau_qu, tau_pu)


def closed_form_taus(
    ops: OperatorSet,
    u: np.ndarray,
    q: np.ndarray,
    p: np.ndarray,
    u_jump_t: np.ndarray,
    eps: float,
    f,
    V,
) -> TraceParams:
    ju = ops.jumps(u)
    return closed_form_taus_from_sums(
        eta_qu=float(ops.jumps(q) @ ju),
        eta_pu=float(ops.jumps(p) @ ju),
        eta_tu=float(np.asarray(u_jump_t) @ ju),
        eta_uu=float(ju @ ju),
        vf_sum=v_f(ops, u, f, V),
        eps=eps,
    )


def numerical_traces(ops: OperatorSet, u, q, p, taus: TraceParams):
    """Single-valued traces ``(u_hat, q_hat, p_hat)`` at the nodes."""
    ju = ops.jumps(u)
    u_hat = ops.averages(u)
    q_hat = ops.averages(q) + taus.tau_qu * ju
    p_hat = ops.averages(p) + taus.tau_pu * ju
    return u_hat, q_hat, p_hat


def lemma_condition_residuals(
    ops: OperatorSet,
    u: np.ndarray,
    q: np.ndarray,
    p: np.ndarray,
    taus: TraceParams,
    u_jump_t: np.ndarray,
    eps: float,
    f,
    V,
) -> tuple[float, float]:
    """Boundary sums whose vanishing gives energy and Hamiltonian conservation.

    The first is the rate ``1/2 d/dt ||u_h||^2``, the second the rate of the
    discrete Hamiltonian, both written in terms of the numerical traces.
    The trace ``u_hat = {u_h}`` makes ``(u_hat - {u_h})_t`` vanish.
    """
    u_hat, q_hat, p_hat = numerical_traces(ops, u, q, p, taus)
    ju, jq, jp = ops.jumps(u), ops.jumps(q), ops.jumps(p)
    u_minus, u_plus = ops.trace_minus @ u, ops.trace_plus @ u
    flux = projected_flux(ops, u, f)
    jflux, avg_flux = ops.jumps(flux), ops.averages(flux)
    du_hat = u_hat - ops.averages(u)
    dq_hat = q_hat - ops.averages(q)
    dp_hat = p_hat - ops.averages(p)
    energy_rate = np.sum(
        V(u_minus) - V(u_plus)
        - avg_flux * ju
        + (jflux - jp) * du_hat
        - ju * dp_hat
        + eps * jq * dq_hat
    )
    hamiltonian_rate = np.sum(
        jp * dp_hat + eps * np.asarray(u_jump_t) * dq_hat
    )
    return float(energy_rate), float(hamiltonian_rate)
