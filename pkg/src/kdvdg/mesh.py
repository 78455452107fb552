"""1D meshes, the mapped Legendre basis and Gauss-Legendre quadrature.

A field in the DG space is stored as a flat coefficient vector of length
``N*(k+1)``, element-major: ``(u_1^0 .. u_1^k, ..., u_N^0 .. u_N^k)``.
On every element the basis is the unnormalized Legendre family mapped from
``[-1, 1]``, so ``phi^l(right end) = 1`` and ``phi^l(left end) = (-1)^l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Partition ``a = x_0 < x_1 < ... < x_N = b`` of a periodic interval."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a periodic mesh needs at least 2 elements")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.sizes.max())

    @property
    def length(self) -> float:
        return self.b - self.a

    def to_physical(self, xi: np.ndarray) -> np.ndarray:
        """Map reference points ``xi`` into every element, shape ``(N, len(xi))``."""
        xi = np.asarray(xi, dtype=float)
        left = self.nodes[:-1, None]
        return left + 0.5 * (xi[None, :] + 1.0) * self.sizes[:, None]

    def locate(self, x: float) -> tuple[int, float]:
        """Element index and reference coordinate of a physical point."""
        x = self.a + (x - self.a) % self.length
        i = int(np.searchsorted(self.nodes, x, side="right")) - 1
        i = min(max(i, 0), self.N - 1)
        xi = 2.0 * (x - self.nodes[i]) / self.sizes[i] - 1.0
        return i, float(np.clip(xi, -1.0, 1.0))


def build_uniform_mesh(a: float, b: float, N: int) -> Mesh:
    if N < 2:
        raise ValueError(f"need N >= 2 elements for periodic jumps, got {N}")
    if not a < b:
        raise ValueError("need a < b")
    return Mesh(np.linspace(a, b, N + 1))


def legendre_eval(l: int, xi):
    """Legendre polynomial ``P_l(xi)`` by the three-term recurrence."""
    xi = np.asarray(xi, dtype=float)
    p_prev, p = np.ones_like(xi), xi.copy()
    if l == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for n in range(1, l):
        p_prev, p = p, ((2 * n + 1) * xi * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_vander(k: int, xi) -> np.ndarray:
    """Matrix ``V[q, l] = P_l(xi_q)`` for ``l = 0..k``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return np.stack([legendre_eval(l, xi) for l in range(k + 1)], axis=-1)


def legendre_deriv_vander(k: int, xi) -> np.ndarray:
    """Matrix ``V[q, l] = P_l'(xi_q)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros((xi.size, k + 1))
    for l in range(1, k + 1):
        # P_l' = sum over j = l-1, l-3, ... of (2j+1) P_j
        for j in range(l - 1, -1, -2):
            out[:, l] += (2 * j + 1) * legendre_eval(j, xi)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return self.nodes.size


def gauss_rule(n_q: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1], exact for degree <= 2*n_q - 1."""
    if n_q < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(n_q)
    return QuadratureRule(x, w)


def default_quadrature_count(k: int) -> int:
    # covers V(u_h) of degree 3k for the cubic potential, with margin
    return max(k + 2, math.ceil((3 * k + 2) / 2)) + 2


def eval_field(coeffs: np.ndarray, k: int, element: int, xi):
    """Value of a DG field on ``element`` at reference coordinate(s) ``xi``."""
    c = np.asarray(coeffs, dtype=float).reshape(-1, k + 1)[element]
    vals = legendre_vander(k, xi) @ c
    return vals if np.ndim(xi) else float(vals[0])


def sample_field(coeffs: np.ndarray, k: int, xi) -> np.ndarray:
    """Values of a DG field at reference points ``xi`` on every element, ``(N, nq)``."""
    c = np.asarray(coeffs, dtype=float).reshape(-1, k + 1)
    return c @ legendre_vander(k, xi).T
