import numpy as np
import pytest
import sympy as sp

from kdvdg import (
    CnoidalWave,
    cnoidal_problem,
    constant_problem,
    get_problem,
    linear_problem,
    nonlinear_problem,
)


@pytest.mark.parametrize("make", [linear_problem, nonlinear_problem, cnoidal_problem, constant_problem])
def test_consistency(make):
    make().check_consistency(rng=1)


def _pde_residual_symbolic(u_expr, eps, f, g_expr):
    x, t = sp.symbols("x t")
    res = sp.diff(u_expr, t) + eps * sp.diff(u_expr, x, 3) + sp.diff(f(u_expr), x) - g_expr
    return sp.lambdify((x, t), sp.simplify(res))


def test_linear_solution_solves_pde():
    x, t = sp.symbols("x t")
    r = _pde_residual_symbolic(sp.sin(x / 2 - sp.Rational(3, 8) * t), 1, lambda u: u, 0)
    assert r(1.3, 0.7) == 0


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_manufactured_source(eps):
    pr = nonlinear_problem(eps)
    x, t = sp.symbols("x t")
    u = sp.sin(2 * sp.pi * x + t)
    res = sp.diff(u, t) + eps * sp.diff(u, x, 3) + sp.diff(u**2 / 2, x)
    fun = sp.lambdify((x, t), res)
    xs = np.linspace(0, 1, 17)
    for tt in (0.0, 0.3, 2.0):
        assert np.allclose(pr.g(xs, tt), fun(xs, tt), atol=1e-12)
    assert pr.g(0.0, 0.0) == pytest.approx(1 - 8 * np.pi**3 * eps)


def test_exact_triples_match_derivatives():
    pr = nonlinear_problem(0.1)
    x = np.linspace(0, 1, 9)
    u, q, p = pr.exact(x, 0.4)
    assert np.allclose(q, 2 * np.pi * np.cos(2 * np.pi * x + 0.4))
    assert np.allclose(p, 0.1 * -(2 * np.pi) ** 2 * u + 0.5 * u**2)


def test_cnoidal_wave_solves_kdv():
    w = CnoidalWave()
    x = np.linspace(0, 1, 23)
    t, h = 0.3, 1e-4
    # u_t by central differences, u_xxx through p = eps q_x + u^2/2
    ut = (w(x, t + h)[0] - w(x, t - h)[0]) / (2 * h)
    px = (w(x + h, t)[2] - w(x - h, t)[2]) / (2 * h)
    assert np.max(np.abs(ut + px)) <= 1e-5 * np.max(np.abs(ut))


def test_cnoidal_parameters():
    w = CnoidalWave(m=0.9, eps=1 / 24**2)
    assert w.amplitude == pytest.approx(192 * 0.9 / 576 * w.K**2)
    assert w.speed == pytest.approx(64 / 576 * 0.8 * w.K**2)
    u = w(np.linspace(0, 1, 1001), 0.0)[0]
    assert u.max() == pytest.approx(w.amplitude)
    assert u.min() >= -1e-12
    # spatial period 1
    assert np.allclose(w(0.2, 0.0)[0], w(1.2, 0.0)[0])


def test_get_problem():
    assert get_problem("cnoidal").name == "cnoidal"
    assert get_problem("nonlinear", 0.01).eps == 0.01
    mod = get_problem("linear", 0.5)
    assert mod.eps == 0.5 and mod.exact is None
    with pytest.raises(KeyError):
        get_problem("heat")
    with pytest.raises(ValueError):
        nonlinear_problem(0.0)


def test_consistency_detects_bad_problem():
    pr = nonlinear_problem()
    bad = type(pr)(**{**pr.__dict__, "fprime": lambda u: 2 * u})
    with pytest.raises(ValueError):
        bad.check_consistency(rng=0)
