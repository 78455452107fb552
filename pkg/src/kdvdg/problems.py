"""Test problems for ``u_t + eps u_xxx + f(u)_x = g`` on a periodic interval.

Exact solutions come as triples ``(u, q, p)`` with ``q = u_x`` and
``p = eps q_x + f(u)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .special import elliptic_K, jacobi_sncndn


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    eps: float
    f: Callable
    fprime: Callable
    V: Callable
    u0: Callable
    domain: tuple[float, float]
    g: Callable | None = None
    exact: Callable | None = None

    @property
    def has_source(self) -> bool:
        return self.g is not None

    def check_consistency(self, rng=None, n=10, tol=1e-6) -> None:
        """Spot-check ``V' = f``, ``f'`` and, if present, the exact ``q`` and ``p``."""
        rng = np.random.default_rng(rng)
        s = rng.uniform(-2.0, 2.0, n)
        d = 1e-5
        if np.max(np.abs((self.V(s + d) - self.V(s - d)) / (2 * d) - self.f(s))) > tol:
            raise ValueError(f"{self.name}: V' != f")
        if np.max(np.abs((self.f(s + d) - self.f(s - d)) / (2 * d) - self.fprime(s))) > tol:
            raise ValueError(f"{self.name}: inconsistent f'")
        if self.exact is None:
            return
        a, b = self.domain
        x = rng.uniform(a, b, n)
        t = rng.uniform(0.0, 1.0, n)
        hx = 1e-3 * (b - a)

        def dx(fun, y):
            # sixth-order central difference
            return (
                -fun(y - 3 * hx) + 9 * fun(y - 2 * hx) - 45 * fun(y - hx)
                + 45 * fun(y + hx) - 9 * fun(y + 2 * hx) + fun(y + 3 * hx)
            ) / (60 * hx)

        u, q, p = self.exact(x, t)
        q_fd = dx(lambda y: self.exact(y, t)[0], x)
        qx_fd = dx(lambda y: self.exact(y, t)[1], x)
        if np.max(np.abs(q - q_fd)) > tol * (1.0 + np.max(np.abs(q))):
            raise ValueError(f"{self.name}: exact q is not u_x")
        p_fd = self.eps * qx_fd + self.f(u)
        if np.max(np.abs(p - p_fd)) > tol * (1.0 + np.max(np.abs(p))):
            raise ValueError(f"{self.name}: exact p is not eps q_x + f(u)")


def _linear_flux():
    return (lambda u: u), (lambda u: np.ones_like(u)), (lambda u: 0.5 * u**2)


def _burgers_flux():
    return (lambda u: 0.5 * u**2), (lambda u: u), (lambda u: u**3 / 6.0)


def linear_problem() -> ProblemSpec:
    """``u_t + u_xxx + u_x = 0`` on ``[0, 4pi]`` with ``u = sin(x/2 - 3t/8)``."""
    f, fp, V = _linear_flux()

    def exact(x, t):
        th = 0.5 * x - 0.375 * t
        return np.sin(th), 0.5 * np.cos(th), 0.75 * np.sin(th)

    return ProblemSpec(
        name="linear",
        eps=1.0,
        f=f, fprime=fp, V=V,
        u0=lambda x: np.sin(0.5 * x),
        domain=(0.0, 4.0 * np.pi),
        exact=exact,
    )


def nonlinear_problem(eps: float = 1.0) -> ProblemSpec:
    """Manufactured ``u = sin(2 pi x + t)`` for ``f(u) = u^2/2`` on ``[0, 1]``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    f, fp, V = _burgers_flux()
    tp = 2.0 * np.pi

    def g(x, t):
        th = tp * x + t
        return (1.0 - 8.0 * np.pi**3 * eps) * np.cos(th) + np.pi * np.sin(2.0 * th)

    def exact(x, t):
        th = tp * x + t
        s = np.sin(th)
        return s, tp * np.cos(th), -tp**2 * eps * s + 0.5 * s**2

    return ProblemSpec(
        name="nonlinear",
        eps=eps,
        f=f, fprime=fp, V=V,
        u0=lambda x: np.sin(tp * x),
        domain=(0.0, 1.0),
        g=g,
        exact=exact,
    )


@dataclass(frozen=True)
class CnoidalWave:
    """``u = A cn^2(4K (x - v t - x0) | m)`` solving ``u_t + eps u_xxx + u u_x = 0``."""

    m: float = 0.9
    eps: float = 1.0 / 24**2
    x0: float = 0.0

    @property
    def K(self) -> float:
        return elliptic_K(self.m)

    @property
    def amplitude(self) -> float:
        return 192.0 * self.m * self.eps * self.K**2

    @property
    def speed(self) -> float:
        return 64.0 * self.eps * (2.0 * self.m - 1.0) * self.K**2

    def __call__(self, x, t):
        K, A, m = self.K, self.amplitude, self.m
        z = 4.0 * K * (np.asarray(x, dtype=float) - self.speed * t - self.x0)
        sn, cn, dn = jacobi_sncndn(z, m)
        u = A * cn**2
        q = -8.0 * A * K * cn * sn * dn
        q_x = -32.0 * A * K**2 * (cn**2 * dn**2 - sn**2 * dn**2 - m * sn**2 * cn**2)
        return u, q, self.eps * q_x + 0.5 * u**2


def cnoidal_problem(m: float = 0.9, eps: float = 1.0 / 24**2) -> ProblemSpec:
    f, fp, V = _burgers_flux()
    wave = CnoidalWave(m=m, eps=eps)
    return ProblemSpec(
        name="cnoidal",
        eps=eps,
        f=f, fprime=fp, V=V,
        u0=lambda x: wave(x, 0.0)[0],
        domain=(0.0, 1.0),
        exact=wave,
    )


def constant_problem(value: float = 1.0, eps: float = 1.0) -> ProblemSpec:
    """Constant state; every interface jump vanishes."""
    f, fp, V = _burgers_flux()

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, value), np.zeros_like(x), np.full_like(x, 0.5 * value**2)

    return ProblemSpec(
        name="constant",
        eps=eps,
        f=f, fprime=fp, V=V,
        u0=lambda x: np.full_like(np.asarray(x, dtype=float), value),
        domain=(0.0, 1.0),
        exact=exact,
    )


PROBLEMS = {
    "linear": linear_problem,
    "nonlinear": nonlinear_problem,
    "cnoidal": cnoidal_problem,
    "constant": constant_problem,
}


def get_problem(name: str, eps: float | None = None) -> ProblemSpec:
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
    if eps is None:
        return PROBLEMS[name]()
    if name == "linear":
        spec = linear_problem()
        return ProblemSpec(**{**spec.__dict__, "eps": eps, "exact": None})
    return PROBLEMS[name](eps=eps)
