"""Convergence tables, invariant time series and solution snapshots.

Everything here writes plain CSV with 17 significant digits so that a table
read back with :func:`read_csv` reproduces the computed floats exactly.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conservation import InvariantRecord
from .integrator import RunResult, advance, run, startup, step_count
from .mesh import Mesh, build_uniform_mesh, legendre_vander
from .problems import ProblemSpec
from .solver import SolverConfig, SolverError

log = logging.getLogger(__name__)

FIELDS = ("u", "q", "p")


def default_dt(problem: ProblemSpec, k: int, mesh: Mesh) -> float:
    """Time step used when none is given.

    ``0.2 (h/|Omega|)^min(k,1)`` for the linear problem and
    ``0.2 h^min(k,1)`` otherwise (on the unit interval the two agree).
    """
    power = min(k, 1)
    if problem.name == "linear":
        return 0.2 * (mesh.h / mesh.length) ** power
    return 0.2 * mesh.h ** power


def _mesh_for(problem: ProblemSpec, N: int) -> Mesh:
    a, b = problem.domain
    return build_uniform_mesh(a, b, N)


@dataclass
class ConvergenceRow:
    N: int
    errors: dict
    orders: dict = field(default_factory=dict)
    failed: bool = False
    message: str = ""


def observed_orders(errors: list[float]) -> list[float]:
    """``log2(e_{j-1}/e_j)``; NaN for the first row or a missing neighbour."""
    out = [math.nan]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0 and np.isfinite(prev) and np.isfinite(cur):
            out.append(math.log2(prev / cur))
        else:
            out.append(math.nan)
    return out


def run_convergence(problem: ProblemSpec, k: int, N_list, T: float,
                    cfg: SolverConfig = SolverConfig(), dt: float | None = None):
    """One row per mesh; a diverging row is marked failed and the sweep goes on."""
    if problem.exact is None:
        raise ValueError(f"{problem.name}: no exact solution to measure errors against")
    N_list = list(N_list)
    if N_list != sorted(N_list):
        raise ValueError("N_list must be ascending")
    rows = []
    for N in N_list:
        mesh = _mesh_for(problem, N)
        step = dt if dt is not None else default_dt(problem, k, mesh)
        try:
            res = run(problem, mesh, k, step, T, cfg)
            rows.append(ConvergenceRow(N, res.errors))
        except SolverError as exc:
            log.error("%s k=%d N=%d failed: %s", problem.name, k, N, exc)
            rows.append(ConvergenceRow(N, {f: math.nan for f in FIELDS}, failed=True,
                                       message=str(exc)))
    for f in FIELDS:
        for row, order in zip(rows, observed_orders([r.errors[f] for r in rows])):
            row.orders[f] = order
    return rows


def run_conservation(problem: ProblemSpec, k: int, N: int, T: float,
                     cfg: SolverConfig = SolverConfig(), dt: float | None = None) -> RunResult:
    mesh = _mesh_for(problem, N)
    step = dt if dt is not None else default_dt(problem, k, mesh)
    return run(problem, mesh, k, step, T, cfg)


def sample_state(state, points_per_element: int = 10):
    """``(x, u_h, q_h, p_h)`` on equispaced points in every element."""
    ops = state.ops
    xi = np.linspace(-1.0, 1.0, points_per_element)
    V = legendre_vander(ops.k, xi)
    x = ops.mesh.to_physical(xi).ravel()
    vals = [(c.reshape(ops.N, ops.k + 1) @ V.T).ravel() for c in (state.u, state.q, state.p)]
    return x, *vals


def run_snapshot(problem: ProblemSpec, k: int, N: int, times,
                 cfg: SolverConfig = SolverConfig(), dt: float | None = None,
                 points_per_element: int = 10) -> dict:
    """Sample the solution at each requested time.

    Returns ``{t: array}`` with columns ``x, u_h, q_h, p_h`` followed by the
    exact ``u, q, p`` (NaN when the problem has none).  A time that is not a
    whole number of steps is taken at the nearest step.
    """
    times = sorted(float(t) for t in times)
    if not times or times[0] < 0:
        raise ValueError("snapshot times must be non-negative")
    mesh = _mesh_for(problem, N)
    step = dt if dt is not None else default_dt(problem, k, mesh)
    T = times[-1]
    steps = step_count(T, step)
    dt_eff = T / steps if steps else step
    targets = {t: int(round(t / dt_eff)) for t in times}

    state = startup(problem, mesh, k, dt_eff, cfg)
    out = {}

    def capture():
        for t, n in targets.items():
            if n == state.step and t not in out:
                x, uh, qh, ph = sample_state(state, points_per_element)
                if problem.exact is not None:
                    ex = problem.exact(x, state.t)
                else:
                    ex = (np.full_like(x, np.nan),) * 3
                out[t] = np.column_stack([x, uh, qh, ph, *ex])

    capture()
    while state.step < steps:
        advance(state, cfg)
        capture()
    return out


# ---------------------------------------------------------------- CSV I/O

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """``(header, float array)``; empty tables give shape ``(0, ncols)``."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


CONVERGENCE_HEADER = ["N", "err_u", "order_u", "err_q", "order_q", "err_p", "order_p", "failed"]

INVARIANT_HEADER = [
    "t", "mass", "energy", "hamiltonian", "tau_qu", "tau_pu",
    "energy_residual", "hamiltonian_residual",
    "half_energy_residual", "half_hamiltonian_residual",
]

SNAPSHOT_HEADER = ["x", "u_h", "q_h", "p_h", "u", "q", "p"]


def write_convergence_csv(path, rows) -> Path:
    table = [
        [r.N, r.errors["u"], r.orders["u"], r.errors["q"], r.orders["q"],
         r.errors["p"], r.orders["p"], int(r.failed)]
        for r in rows
    ]
    return write_csv(path, CONVERGENCE_HEADER, table)


def write_invariants_csv(path, records: list[InvariantRecord]) -> Path:
    return write_csv(path, INVARIANT_HEADER,
                     [[getattr(r, name) for name in INVARIANT_HEADER] for r in records])


def write_snapshot_csv(path, table: np.ndarray) -> Path:
    return write_csv(path, SNAPSHOT_HEADER, table)


def convergence_filename(problem: str, k: int) -> str:
    return f"convergence_{problem}_k{k}.csv"


def invariants_filename(problem: str, k: int, N: int) -> str:
    return f"invariants_{problem}_k{k}_N{N}.csv"


def snapshot_filename(problem: str, t: float) -> str:
    return f"snapshot_{problem}_t{t:g}.csv"


def relative_drift(values) -> float:
    """``max |v(t) - v(0)| / |v(0)|`` (absolute when ``v(0) = 0``)."""
    v = np.asarray(values, dtype=float)
    scale = abs(v[0]) if v[0] != 0 else 1.0
    return float(np.max(np.abs(v - v[0])) / scale)


__all__ = [
    "ConvergenceRow", "default_dt", "observed_orders", "run_convergence",
    "run_conservation", "run_snapshot", "sample_state",
    "write_csv", "read_csv", "write_convergence_csv", "write_invariants_csv",
    "write_snapshot_csv", "convergence_filename", "invariants_filename",
    "snapshot_filename", "relative_drift",
]
