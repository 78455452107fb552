import numpy as np
import pytest

from kdvdg import build_uniform_mesh, energy, l2_project, linear_problem, nonlinear_problem, run, startup
from kdvdg.integrator import (
    StepFailure,
    StepHistory,
    advance,
    nonuniform_coefficients,
    nonuniform_jump_t,
    step_count,
    uniform_jump_t,
)
from kdvdg.solver import SolverConfig


def _poly_history(rng):
    c = rng.normal(size=(3, 5))
    return (lambda t: c[0] + c[1] * t + c[2] * t**2), (lambda t: c[1] + 2 * c[2] * t)


@pytest.mark.parametrize("dt", [0.3, 0.05, 1e-3])
def test_uniform_stencil_exact_on_quadratics(rng, dt):
    j, dj = _poly_history(rng)
    t = 0.7
    cl = uniform_jump_t(j(t - dt), j(t - 0.5 * dt), dt)
    # the weights scale like 1/dt, and so does their round-off
    assert np.max(np.abs(cl(j(t)) - dj(t))) <= 1e-12 * max(1.0, 1.0 / dt)


@pytest.mark.parametrize("dt", [0.4, 0.1, 0.01])
def test_nonuniform_stencil_exact_on_quadratics(rng, dt):
    j, dj = _poly_history(rng)
    s = 0.5 * dt
    cl = nonuniform_jump_t(j(0.0), j(s**2), dt)
    assert np.max(np.abs(cl(j(s)) - dj(s))) <= 1e-12 * max(1.0, 1.0 / s)


@pytest.mark.parametrize("dt", [0.5, 0.1, 0.02])
def test_printed_coefficients_are_lagrange_weights(dt):
    s = 0.5 * dt
    nodes = np.array([0.0, s**2, s])
    # derivative of the Lagrange basis at s
    w = []
    for i in range(3):
        others = np.delete(nodes, i)
        den = np.prod(nodes[i] - others)
        w.append(((s - others[0]) + (s - others[1])) / den)
    assert np.allclose(nonuniform_coefficients(dt), w, rtol=1e-12)


def test_nonuniform_singular_at_two():
    with pytest.raises(ZeroDivisionError):
        nonuniform_coefficients(2.0)


def test_step_count_rules():
    assert step_count(0.0, 0.1) == 0
    assert step_count(1.0, 0.1) == 10
    assert step_count(0.01, 0.1) == 1
    assert step_count(1.04, 0.1) == 10
    with pytest.raises(ValueError):
        step_count(-1.0, 0.1)


def test_history_keeps_latest_levels():
    h = StepHistory()
    for t in range(5):
        h.push(float(t), np.full(2, t))
    assert h.times == [2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        h.push(1.0, np.zeros(2))


def test_zero_final_time_returns_projection():
    pr = nonlinear_problem()
    mesh = build_uniform_mesh(0, 1, 8)
    res = run(pr, mesh, 2, 0.05, 0.0)
    assert res.state.step == 0 and len(res.records) == 1
    assert np.array_equal(res.state.u, l2_project(pr.u0, mesh, 2))


def test_startup_rejects_large_step():
    with pytest.raises(ValueError):
        startup(linear_problem(), build_uniform_mesh(0, 4 * np.pi, 8), 2, 2.0)


def test_energy_preserved_per_step():
    pr = linear_problem()
    cfg = SolverConfig()
    res = run(pr, build_uniform_mesh(0, 4 * np.pi, 16), 2, 0.3, 3.0, cfg)
    e = np.array([r.energy for r in res.records])
    assert np.max(np.abs(np.diff(e))) <= 10 * cfg.tol_residual * max(1.0, e[0])
    assert len(res.state.newton_iterations) == res.state.step == 10


def test_step_failure_carries_context(monkeypatch):
    import kdvdg.integrator as integ
    from kdvdg.solver import NoConvergenceError

    state = startup(nonlinear_problem(), build_uniform_mesh(0, 1, 8), 1, 0.05)

    def boom(*a, **kw):
        raise NoConvergenceError("forced", 3, 1.0)

    monkeypatch.setattr(integ, "solve_halfstep", boom)
    with pytest.raises(StepFailure) as info:
        advance(state)
    assert info.value.step == 0 and isinstance(info.value.cause, NoConvergenceError)
