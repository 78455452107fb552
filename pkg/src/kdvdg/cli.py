"""Command-line driver for the experiments.

Values come from (highest priority first) command-line flags, a plain
``key=value`` config file given with ``--config``, and the defaults below.
The exit status is 0 only when every requested run converged.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .problems import get_problem
from .solver import SolverConfig, SolverError

log = logging.getLogger("kdvdg")

DEFAULTS = {
    "problem": "linear",
    "k": "2",
    "N": "8,16,32,64",
    "T": "0.1",
    "dt": None,
    "eps": None,
    "tol": "1e-12",
    "out": ".",
    "mode": "convergence",
    "snap_times": "5",
}


def _int_list(text: str) -> list[int]:
    vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    if not vals or min(vals) < 2:
        raise ValueError(f"need a list of element counts >= 2, got {text!r}")
    return vals


def _float_list(text: str) -> list[float]:
    vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    if not vals:
        raise ValueError("empty list")
    return vals


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kdvdg",
        description="Conservative DG experiments for third-order KdV-type equations.",
    )
    # no defaults here so that unset flags fall through to the config file
    p.add_argument("--problem", choices=["linear", "nonlinear", "cnoidal"])
    p.add_argument("--k", type=int, help="polynomial degree")
    p.add_argument("--N", help="element count(s), comma separated")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--dt", type=float, help="time step (default: problem rule)")
    p.add_argument("--eps", type=float, help="dispersion coefficient")
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mode", choices=["convergence", "conservation", "snapshot"])
    p.add_argument("--snap-times", dest="snap_times", help="comma separated times")
    p.add_argument("--config", help="key=value file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return {
        "problem": str(opts["problem"]),
        "k": int(opts["k"]),
        "N": _int_list(opts["N"]),
        "T": float(opts["T"]),
        "dt": None if opts["dt"] is None else float(opts["dt"]),
        "eps": None if opts["eps"] is None else float(opts["eps"]),
        "tol": float(opts["tol"]),
        "out": Path(opts["out"]),
        "mode": str(opts["mode"]),
        "snap_times": _float_list(opts["snap_times"]),
    }


def execute(opts: dict) -> bool:
    """Run the requested mode; True when every run converged."""
    problem = get_problem(opts["problem"], opts["eps"])
    cfg = SolverConfig(tol_residual=opts["tol"])
    out, k, mode = opts["out"], opts["k"], opts["mode"]
    name = opts["problem"]

    if mode == "convergence":
        rows = ex.run_convergence(problem, k, opts["N"], opts["T"], cfg, opts["dt"])
        path = ex.write_convergence_csv(out / ex.convergence_filename(name, k), rows)
        for r in rows:
            status = "FAILED" if r.failed else f"{r.errors['u']:.3e}  order {r.orders['u']:.2f}"
            print(f"N={r.N:4d}  u error {status}")
        print(f"wrote {path}")
        return not any(r.failed for r in rows)

    if mode == "conservation":
        ok = True
        for N in opts["N"]:
            try:
                res = ex.run_conservation(problem, k, N, opts["T"], cfg, opts["dt"])
            except SolverError as exc:
                log.error("N=%d: %s", N, exc)
                ok = False
                continue
            path = ex.write_invariants_csv(out / ex.invariants_filename(name, k, N), res.records)
            drifts = {
                key: ex.relative_drift([getattr(r, key) for r in res.records])
                for key in ("mass", "energy", "hamiltonian")
            }
            print(f"N={N}: " + ", ".join(f"{key} drift {v:.2e}" for key, v in drifts.items()))
            print(f"wrote {path}")
        return ok

    if len(opts["N"]) != 1:
        raise ValueError("snapshot mode takes a single N")
    try:
        tables = ex.run_snapshot(problem, k, opts["N"][0], opts["snap_times"], cfg, opts["dt"])
    except SolverError as exc:
        log.error("%s", exc)
        return False
    for t, table in tables.items():
        print(f"wrote {ex.write_snapshot_csv(out / ex.snapshot_filename(name, t), table)}")
    return True


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        ok = execute(opts)
    except (ValueError, KeyError, OSError) as exc:
        parser.error(str(exc))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
