import math

import numpy as np
import pytest

from kdvdg import build_uniform_mesh, cnoidal_problem, constant_problem, l2_project, linear_problem, nonlinear_problem
from kdvdg import cli
from kdvdg import experiments as ex
from kdvdg.solver import NoConvergenceError


def test_default_dt_rules():
    lin = linear_problem()
    m = build_uniform_mesh(0, 4 * np.pi, 16)
    assert ex.default_dt(lin, 2, m) == pytest.approx(0.2 / 16)
    assert ex.default_dt(lin, 0, m) == 0.2
    m1 = build_uniform_mesh(0, 1, 32)
    assert ex.default_dt(nonlinear_problem(), 2, m1) == pytest.approx(0.2 / 32)


def test_observed_orders():
    o = ex.observed_orders([1.0, 0.25, math.nan, 0.01])
    assert math.isnan(o[0]) and o[1] == pytest.approx(2.0)
    assert math.isnan(o[2]) and math.isnan(o[3])


def test_convergence_sweep_and_csv_round_trip(tmp_path):
    rows = ex.run_convergence(linear_problem(), 1, [4, 8], 0.05)
    assert [r.N for r in rows] == [4, 8] and not any(r.failed for r in rows)
    assert rows[1].errors["u"] < rows[0].errors["u"]
    path = ex.write_convergence_csv(tmp_path / "c.csv", rows)
    header, data = ex.read_csv(path)
    assert header == ex.CONVERGENCE_HEADER
    assert data[1, 1] == rows[1].errors["u"]
    assert data[1, 2] == rows[1].orders["u"]
    assert math.isnan(data[0, 2])


def test_sweep_validation():
    with pytest.raises(ValueError):
        ex.run_convergence(linear_problem(), 1, [8, 4], 0.1)
    with pytest.raises(ValueError):
        ex.run_convergence(nonlinear_problem().__class__(
            **{**nonlinear_problem().__dict__, "exact": None}), 1, [4], 0.1)


def test_failed_row_is_marked(monkeypatch):
    real_run = ex.run

    def flaky(problem, mesh, k, dt, T, cfg):
        if mesh.N == 8:
            raise NoConvergenceError("forced", 5, 1.0)
        return real_run(problem, mesh, k, dt, T, cfg)

    monkeypatch.setattr(ex, "run", flaky)
    rows = ex.run_convergence(linear_problem(), 1, [4, 8, 16], 0.05)
    assert [r.failed for r in rows] == [False, True, False]
    assert math.isnan(rows[1].errors["u"])
    assert math.isnan(rows[2].orders["u"])


def test_invariant_csv_round_trip_is_bit_exact(tmp_path):
    res = ex.run_conservation(nonlinear_problem(), 1, 8, 0.1)
    path = ex.write_invariants_csv(tmp_path / "i.csv", res.records)
    header, data = ex.read_csv(path)
    want = np.array([[getattr(r, h) for h in header] for r in res.records])
    assert np.array_equal(data, want)


def test_zero_initial_data_gives_zero_invariants():
    res = ex.run_conservation(constant_problem(0.0), 2, 6, 0.5, dt=0.1)
    for r in res.records:
        assert r.mass == r.energy == r.hamiltonian == 0.0
        assert r.tau_qu == r.tau_pu == 0.0


def test_snapshot_at_zero_is_projection():
    pr = nonlinear_problem()
    tables = ex.run_snapshot(pr, 2, 8, [0.0, 0.05])
    x, uh = tables[0.0][:, 0], tables[0.0][:, 1]
    ops_u = l2_project(pr.u0, build_uniform_mesh(0, 1, 8), 2)
    from kdvdg.mesh import legendre_vander
    xi = np.linspace(-1, 1, 10)
    want = (ops_u.reshape(8, 3) @ legendre_vander(2, xi).T).ravel()
    assert np.array_equal(uh, want)
    assert set(tables) == {0.0, 0.05}
    with pytest.raises(ValueError):
        ex.run_snapshot(pr, 2, 8, [-1.0])


@pytest.mark.slow
def test_experiment2_snapshot_pointwise_error():
    tab = ex.run_snapshot(nonlinear_problem(), 2, 32, [5.0])[5.0]
    assert np.max(np.abs(tab[:, 1] - tab[:, 4])) <= 5e-3


@pytest.mark.slow
def test_cnoidal_crest_location():
    pr = cnoidal_problem()
    tab = ex.run_snapshot(pr, 2, 32, [5.0])[5.0]
    x, uh, u = tab[:, 0], tab[:, 1], tab[:, 4]
    h = 1.0 / 32
    d = abs(x[np.argmax(uh)] - x[np.argmax(u)])
    assert min(d, 1.0 - d) <= h
    assert pr.exact.speed == pytest.approx(0.5908, abs=5e-4)


def test_filenames():
    assert ex.convergence_filename("linear", 2) == "convergence_linear_k2.csv"
    assert ex.invariants_filename("cnoidal", 2, 32) == "invariants_cnoidal_k2_N32.csv"
    assert ex.snapshot_filename("cnoidal", 5.0) == "snapshot_cnoidal_t5.csv"


def test_relative_drift():
    assert ex.relative_drift([2.0, 2.2, 1.9]) == pytest.approx(0.1)
    assert ex.relative_drift([0.0, 1e-3]) == pytest.approx(1e-3)


# ------------------------------------------------------------------ CLI

def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nk = 1\nT = 0.5\nN = 4,8\n")
    opts = cli.resolve(cli.build_parser().parse_args(["--config", str(cfg), "--T", "0.2"]))
    assert opts["k"] == 1 and opts["T"] == 0.2 and opts["N"] == [4, 8]
    assert opts["problem"] == "linear"


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    with pytest.raises(ValueError):
        cli.read_config(bad)
    bad.write_text("just words\n")
    with pytest.raises(ValueError):
        cli.read_config(bad)


def test_cli_convergence_writes_table(tmp_path, capsys):
    code = cli.main(["--problem", "linear", "--k", "1", "--N", "4,8", "--T", "0.05",
                     "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "convergence_linear_k1.csv").exists()
    assert "order" in capsys.readouterr().out


def test_cli_conservation_and_snapshot(tmp_path):
    assert cli.main(["--problem", "nonlinear", "--k", "1", "--N", "8", "--T", "0.05",
                     "--mode", "conservation", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "invariants_nonlinear_k1_N8.csv").exists()
    assert cli.main(["--problem", "nonlinear", "--k", "1", "--N", "8", "--mode", "snapshot",
                     "--snap-times", "0,0.05", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "snapshot_nonlinear_t0.05.csv").exists()


def test_cli_exit_codes(tmp_path, monkeypatch):
    with pytest.raises(SystemExit) as info:
        cli.main(["--N", "1"])
    assert info.value.code == 2

    def fail(*a, **kw):
        raise NoConvergenceError("forced", 1, 1.0)

    monkeypatch.setattr(ex, "run", fail)
    assert cli.main(["--k", "1", "--N", "4", "--T", "0.05", "--out", str(tmp_path)]) == 1
