import numpy as np
import pytest

from kdvdg import TraceParams, build_operators, l2_project, nonlinear_problem, linear_problem
from kdvdg.conservation import (
    DegenerateTraceError,
    closed_form_taus_from_sums,
    energy,
    eta,
    hamiltonian,
    lemma_condition_residuals,
    mass,
    numerical_traces,
    v_f,
)
from kdvdg.mesh import build_uniform_mesh, gauss_rule, legendre_vander
from kdvdg.solver import solve_gradient

from conftest import random_mesh


def _quad_values(ops, c, n=12):
    rule = gauss_rule(n)
    return rule, c.reshape(-1, ops.k + 1) @ legendre_vander(ops.k, rule.nodes).T


def test_invariants_against_quadrature(rng):
    ops = build_operators(random_mesh(rng, 5), 2)
    pr = nonlinear_problem(0.5)
    u, q = rng.normal(size=(2, ops.ndof))
    rule, uq = _quad_values(ops, u)
    _, qq = _quad_values(ops, q)
    w = 0.5 * ops.mesh.sizes[:, None] * rule.weights
    assert mass(ops, u) == pytest.approx(np.sum(w * uq), rel=1e-13)
    assert energy(ops, u) == pytest.approx(np.sum(w * uq**2), rel=1e-13)
    H = np.sum(w * (0.5 * pr.eps * qq**2 - uq**3 / 6))
    assert hamiltonian(ops, u, q, pr.eps, pr.V) == pytest.approx(H, rel=1e-12)


def test_eta_is_jump_inner_product(rng):
    ops = build_operators(random_mesh(rng, 4), 1)
    u, v = rng.normal(size=(2, ops.ndof))
    assert eta(ops, u, v) == pytest.approx(v @ ops.J @ u)
    assert eta(ops, u, u) >= 0


def test_v_f_vanishes_for_linear_flux(rng):
    ops = build_operators(random_mesh(rng, 6), 2)
    pr = linear_problem()
    u = rng.normal(size=ops.ndof)
    assert abs(v_f(ops, u, pr.f, pr.V)) < 1e-12


def test_v_f_vanishes_for_continuous_fields():
    ops = build_operators(build_uniform_mesh(0, 1, 8), 1)
    pr = nonlinear_problem()
    u = l2_project(lambda x: 2.0 + 0.0 * x, ops.mesh, 1)
    assert abs(v_f(ops, u, pr.f, pr.V)) < 1e-14


def test_closed_form_satisfies_both_constraints(rng):
    for _ in range(20):
        e_qu, e_pu, e_tu, vf = rng.normal(size=4)
        e_uu = rng.uniform(0.1, 2.0)
        eps = rng.uniform(0.01, 1.0)
        t = closed_form_taus_from_sums(e_qu, e_pu, e_tu, e_uu, vf, eps)
        assert vf - t.tau_pu * e_uu + eps * t.tau_qu * e_qu == pytest.approx(0.0, abs=1e-10)
        assert t.tau_pu * e_pu + eps * t.tau_qu * e_tu == pytest.approx(0.0, abs=1e-10)


def test_closed_form_degenerate_cases():
    with pytest.raises(DegenerateTraceError):
        closed_form_taus_from_sums(0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(DegenerateTraceError):
        # eta_qu eta_pu + eta_tu eta_uu = 0
        closed_form_taus_from_sums(1.0, 1.0, -1.0, 1.0, 1.0, 1.0)


def test_numerical_traces(rng):
    ops = build_operators(random_mesh(rng, 4), 2)
    u, q, p = rng.normal(size=(3, ops.ndof))
    uh, qh, ph = numerical_traces(ops, u, q, p, TraceParams(0.5, -2.0))
    assert np.allclose(uh, ops.averages(u))
    assert np.allclose(qh, ops.averages(q) + 0.5 * ops.jumps(u))
    assert np.allclose(ph, ops.averages(p) - 2.0 * ops.jumps(u))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_lemma_rates_match_semidiscrete_derivatives(rng, k):
    """The boundary sums equal d/dt of the invariants along the DG flow, for any tau."""
    ops = build_operators(random_mesh(rng, 5), k)
    pr = nonlinear_problem(0.3)
    eps = pr.eps
    u = rng.normal(size=ops.ndof)
    q = solve_gradient(ops, u)
    tq, tp = rng.normal(size=2)
    fm = ops.moments(pr.f(ops.at_quadrature(u)))
    p = (fm - eps * ops.DA @ q + eps * tq * ops.J @ u) / ops.mass_diag
    ut = (ops.DA @ p - tp * ops.J @ u) / ops.mass_diag
    qt = -(ops.DA @ ut) / ops.mass_diag
    e_rate = u @ (ops.mass_diag * ut)
    h_rate = eps * q @ (ops.mass_diag * qt) - fm @ ut
    er, hr = lemma_condition_residuals(ops, u, q, p, TraceParams(tq, tp), ops.jumps(ut),
                                       eps, pr.f, pr.V)
    assert er == pytest.approx(e_rate, rel=1e-9, abs=1e-10)
    assert hr == pytest.approx(h_rate, rel=1e-9, abs=1e-10)
