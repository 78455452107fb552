"""Global DG operators with periodic wrap, and the element-wise L2 projection.

Row blocks are indexed by the test function, column blocks by the trial
function.  With that layout the first-order system reads

    M q + (D + A) u = 0            <=>  (q, v) + (u, v_x) - <{u}, v n> = 0
    z^T J u = <[u], z n>

where ``[w](x_i) = w(x_i^-) - w(x_i^+)`` and ``{w}`` is the trace average.
Mesh nodes ``x_1 .. x_N`` carry the traces; ``x_N`` is identified with ``x_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    Mesh,
    QuadratureRule,
    default_quadrature_count,
    gauss_rule,
    legendre_deriv_vander,
    legendre_vander,
)


def _signs(k: int) -> np.ndarray:
    return (-1.0) ** np.arange(k + 1)


def mass_block(k: int, h: float) -> np.ndarray:
    return np.diag(h / (2.0 * np.arange(k + 1) + 1.0))


def deriv_block(k: int) -> np.ndarray:
    """``B[l, j] = int_{-1}^{1} P_l P_j' dxi`` (independent of the element size)."""
    rule = gauss_rule(k + 1)
    V = legendre_vander(k, rule.nodes)
    dV = legendre_deriv_vander(k, rule.nodes)
    return (V * rule.weights[:, None]).T @ dV


def average_blocks(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The (minus, centre, plus) blocks of A, indexed ``[test j, trial l]``."""
    s = _signs(k)
    minus = np.repeat(s[:, None] / 2.0, k + 1, axis=1)
    centre = (np.outer(s, s) - 1.0) / 2.0
    plus = np.repeat(-s[None, :] / 2.0, k + 1, axis=0)
    return minus, centre, plus


def jump_blocks(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The (minus, centre, plus) blocks of J, indexed ``[test l, trial j]``."""
    s = _signs(k)
    minus = np.repeat(-s[:, None], k + 1, axis=1)
    centre = 1.0 + np.outer(s, s)
    plus = np.repeat(-s[None, :], k + 1, axis=0)
    return minus, centre, plus


def _periodic_tridiag(N: int, minus, centre, plus) -> np.ndarray:
    m = centre.shape[0]
    out = np.zeros((N * m, N * m))
    for i in range(N):
        rows = slice(i * m, (i + 1) * m)
        for offset, block in ((-1, minus), (0, centre), (1, plus)):
            j = (i + offset) % N
            # N = 2 puts both neighbours in the same column block
            out[rows, j * m:(j + 1) * m] += block
    return out


def assemble_mass(mesh: Mesh, k: int) -> np.ndarray:
    diag = np.concatenate([np.diag(mass_block(k, h)) for h in mesh.sizes])
    return np.diag(diag)


def assemble_deriv(mesh: Mesh, k: int) -> np.ndarray:
    return np.kron(np.eye(mesh.N), deriv_block(k).T)


def assemble_average(mesh: Mesh, k: int) -> np.ndarray:
    return _periodic_tridiag(mesh.N, *average_blocks(k))


def assemble_jump(mesh: Mesh, k: int) -> np.ndarray:
    return _periodic_tridiag(mesh.N, *jump_blocks(k))


def trace_operators(mesh: Mesh, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices giving the values ``w(x_i^-)`` and ``w(x_i^+)`` at nodes ``x_1..x_N``."""
    N, m = mesh.N, k + 1
    left_side = np.zeros((N, N * m))
    right_side = np.zeros((N, N * m))
    s = _signs(k)
    for i in range(N):
        left_side[i, i * m:(i + 1) * m] = 1.0
        nxt = (i + 1) % N
        right_side[i, nxt * m:(nxt + 1) * m] = s
    return left_side, right_side


def l2_project(g, mesh: Mesh, k: int, n_q: int | None = None) -> np.ndarray:
    """Element-wise L2 projection of a callable ``g(x)`` onto the DG space."""
    if n_q is None:
        n_q = max(default_quadrature_count(k), 10)
    rule = gauss_rule(n_q)
    x = mesh.to_physical(rule.nodes)
    gx = np.broadcast_to(np.asarray(g(x), dtype=float), x.shape)
    V = legendre_vander(k, rule.nodes)
    scale = (2.0 * np.arange(k + 1) + 1.0) / 2.0
    return ((gx * rule.weights) @ V * scale).ravel()


@dataclass(frozen=True)
class OperatorSet:
    """Assembled operators and trace maps for one mesh and degree."""

    mesh: Mesh
    k: int
    M: np.ndarray
    D: np.ndarray
    A: np.ndarray
    J: np.ndarray
    trace_minus: np.ndarray
    trace_plus: np.ndarray
    quad: QuadratureRule
    DA: np.ndarray = field(init=False)
    mass_diag: np.ndarray = field(init=False)
    jump_op: np.ndarray = field(init=False)
    avg_op: np.ndarray = field(init=False)
    vander: np.ndarray = field(init=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "DA", self.D + self.A)
        set_(self, "mass_diag", np.diag(self.M).copy())
        set_(self, "jump_op", self.trace_minus - self.trace_plus)
        set_(self, "avg_op", 0.5 * (self.trace_minus + self.trace_plus))
        set_(self, "vander", legendre_vander(self.k, self.quad.nodes))

    @property
    def N(self) -> int:
        return self.mesh.N

    @property
    def ndof(self) -> int:
        return self.mesh.N * (self.k + 1)

    def jumps(self, w: np.ndarray) -> np.ndarray:
        return self.jump_op @ w

    def averages(self, w: np.ndarray) -> np.ndarray:
        return self.avg_op @ w

    def at_quadrature(self, w: np.ndarray) -> np.ndarray:
        return w.reshape(self.N, self.k + 1) @ self.vander.T

    def moments(self, values: np.ndarray) -> np.ndarray:
        """``int_{I_i} F phi_i^l dx`` from values of ``F`` at the quadrature points."""
        half_h = 0.5 * self.mesh.sizes[:, None]
        return (half_h * ((values * self.quad.weights) @ self.vander)).ravel()

    def project_values(self, values: np.ndarray) -> np.ndarray:
        """L2 projection of a function given by its quadrature-point values."""
        return self.moments(values) / self.mass_diag

    def integrate(self, values: np.ndarray) -> float:
        half_h = 0.5 * self.mesh.sizes[:, None]
        return float(np.sum(half_h * values * self.quad.weights))


def build_operators(mesh: Mesh, k: int, n_q: int | None = None) -> OperatorSet:
    if k < 0:
        raise ValueError("polynomial degree must be non-negative")
    minus, plus = trace_operators(mesh, k)
    return OperatorSet(
        mesh=mesh,
        k=k,
        M=assemble_mass(mesh, k),
        D=assemble_deriv(mesh, k),
        A=assemble_average(mesh, k),
        J=assemble_jump(mesh, k),
        trace_minus=minus,
        trace_plus=plus,
        quad=gauss_rule(n_q or default_quadrature_count(k)),
    )
