import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

import selfsim.io as sio
from selfsim.cli import run_cli
from selfsim.phiplane import PhiOptions, TailFit, TailKind, solve_phi
from selfsim.profile import integrate_profile
from selfsim.residual import (
    ResidualGrid,
    pde_residual,
    profile_options_for,
    selfsim_spec,
)


def _parse_csv(text):
    lines = text.splitlines()
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return lines[0], data


def test_dumps_shape():
    text = sio.dumps({"a": 1.5})
    assert text.endswith("\n")
    assert json.loads(text) == {"a": 1.5}


def test_params_payload(p21):
    pay = sio.params_payload(p21)
    assert list(pay) == ["N", "p", "p_c", "mu", "w_star", "C1", "C2", "C3", "B0", "B1"]
    back = json.loads(sio.dumps(pay))
    assert back == pay  # repr round-trip keeps every float exact
    assert back["w_star"] == pytest.approx(8.0, abs=1e-12)
    assert back["C3"] == pytest.approx(0.16741071428571433, rel=1e-15)


def test_profile_csv_round_trip(p21):
    sol = integrate_profile(p21, 0.5)
    text = sio.profile_csv_text(sol)
    assert text.endswith("\n")
    header, data = _parse_csv(text)
    assert header == "r,f,fp,g,w,wp,E"
    assert data.shape == (sol.r.size, 7)
    assert np.array_equal(data[:, 0], sol.r)
    assert np.array_equal(data[:, 1], sol.f)
    assert np.array_equal(data[:, 6], sol.E)


def test_phi_csv_columns(p21):
    s = solve_phi(p21, 0.05, PhiOptions(xi_max=10.0))
    header, data = _parse_csv(sio.phi_csv_text(s))
    assert header == "xi,phi,phi_over_xi_p2,slack_upper"
    assert_allclose(data[:, 2], data[:, 1] * data[:, 0] ** (-p21.p / 2.0), rtol=1e-12)
    assert_allclose(data[:, 3], p21.mu * data[:, 0] - data[:, 1], rtol=1e-12)


def test_bisect_payload_round_trip(bisect21):
    pay = sio.bisect_payload(bisect21)
    assert list(pay) == [
        "N",
        "p",
        "beta_star",
        "bracket_lo",
        "bracket_hi",
        "iterations",
        "tol_beta",
        "r_max",
        "history",
    ]
    assert json.loads(sio.dumps(pay)) == pay
    assert pay["beta_star"] == bisect21.beta_star
    row = pay["history"][0]
    assert list(row) == ["beta", "verdict", "witness_r"]
    assert row["verdict"] in ("A", "C", "Inconclusive")


def test_tailfit_payload():
    fit = TailFit(
        kind=TailKind.K_C, fitted=1.0, theory=2.0, window_lo=1.0, window_hi=10.0,
        rel_err=0.5,
    )
    pay = sio.tailfit_payload(fit)
    assert list(pay) == ["kind", "fitted", "theory", "window_lo", "window_hi", "rel_err"]
    assert pay["kind"] == "K_C"


def test_residual_payload_and_field_csv(p21):
    grid = ResidualGrid(nt=10, nr=12)
    sol = integrate_profile(p21, 0.3, profile_options_for(grid, 0.3))
    rep = pde_residual(selfsim_spec(sol), grid, keep_field=True)
    pay = sio.residual_payload(rep)
    assert list(pay) == ["sup_residual", "l2_residual", "refinement_order", "excluded_cells"]
    header, data = _parse_csv(sio.residual_field_csv_text(rep))
    assert header == "t,r,residual"
    assert data.shape == ((grid.nt - 2) * (grid.nr - 4), 3)
    bare = pde_residual(selfsim_spec(sol), grid)
    with pytest.raises(ValueError):
        sio.residual_field_csv_text(bare)


def test_cache_round_trip(tmp_path, monkeypatch, p21):
    monkeypatch.setenv("SELFSIM_CACHE_DIR", str(tmp_path))
    assert sio.cache_dir() == tmp_path
    t1, hit1 = sio.cached_bisect(p21, tol_beta=1e-6)
    t2, hit2 = sio.cached_bisect(p21, tol_beta=1e-6)
    assert (hit1, hit2) == (False, True)
    assert t1 == t2  # cache hits are byte-identical
    files = list(tmp_path.glob("bisect-*.json"))
    assert len(files) == 1
    assert sio.CACHE_TAG in files[0].name
    t3, hit3 = sio.cached_bisect(p21, tol_beta=1e-6, use_cache=False)
    assert hit3 is False
    assert t3 == t1  # recomputing reproduces the same bytes


def test_write_text_wraps_oserror(tmp_path):
    with pytest.raises(OSError) as ei:
        sio.write_text("/nonexistent-root/x.json", "{}\n")
    assert "/nonexistent-root/x.json" in str(ei.value)


def test_cli_params_json(capsys):
    assert run_cli(["params", "--N", "2", "--p", "1.6"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mu"] == pytest.approx(4.0, abs=1e-12)
    assert out["w_star"] == pytest.approx(8.0, abs=1e-12)


def test_cli_validation_failures_exit_1(capsys):
    assert run_cli(["params", "--N", "2", "--p", "2.5"]) == 1
    assert run_cli(["nonsense"]) == 1
    assert run_cli(["classify", "--N", "2", "--p", "1.6"]) == 1  # needs a beta
    assert run_cli([]) == 1
    err = capsys.readouterr().err
    assert err.strip()  # diagnostics land on stderr


def test_cli_classify_shapes(capsys):
    assert run_cli(["classify", "--N", "2", "--p", "1.6", "--beta", "0.05"]) == 0
    one = json.loads(capsys.readouterr().out)
    assert one["verdict"] == "C"
    assert one["witness_r"] == pytest.approx(1.692226681854084, rel=1e-9)
    assert run_cli(["classify", "--N", "2", "--p", "1.6", "--beta-list", "0.05,10"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [row["verdict"] for row in rows] == ["C", "A"]


def test_cli_profile_writes_csv(tmp_path, capsys):
    out = tmp_path / "prof.csv"
    code = run_cli(
        ["profile", "--N", "2", "--p", "1.6", "--beta", "0.5", "--csv", str(out)]
    )
    assert code == 0
    assert out.read_text().startswith("r,f,fp,g,w,wp,E\n")
    summary = json.loads(capsys.readouterr().out)
    assert summary["termination"] == "WExceedsWStar"
    bad = run_cli(
        ["profile", "--N", "2", "--p", "1.6", "--beta", "0.5", "--csv",
         "/nonexistent-root/prof.csv"]
    )
    assert bad == 1


def test_cli_bisect_cache_bytes_stable(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SELFSIM_CACHE_DIR", str(tmp_path))
    args = ["bisect", "--N", "2", "--p", "1.6", "--tol-beta", "1e-6"]
    assert run_cli(args) == 0
    first = capsys.readouterr().out
    assert run_cli(args) == 0  # second run is served from the cache
    assert capsys.readouterr().out == first
    pay = json.loads(first)
    assert pay["tol_beta"] == 1e-6
    assert pay["bracket_hi"] - pay["bracket_lo"] <= 1e-6


def test_cli_numerical_failure_exits_2(capsys):
    args = ["bisect", "--N", "2", "--p", "1.6", "--r-max", "1.5", "--no-cache"]
    assert run_cli(args) == 2
    assert capsys.readouterr().err.strip()


def test_cli_phi_and_tailfit(capsys):
    assert run_cli(["phi", "--N", "2", "--p", "1.6", "--beta", "10"]) == 0
    pay = json.loads(capsys.readouterr().out)
    assert pay["regime"] == "ApproachingWStar"
    assert pay["reason"] == "phi_floor"
    code = run_cli(
        ["tailfit", "--N", "2", "--p", "1.6", "--beta", "0.05", "--kind", "K_C",
         "--xi-max", "1e6"]
    )
    assert code == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["kind"] == "K_C"
    assert fit["window_hi"] == pytest.approx(10.0 * fit["window_lo"], rel=1e-9)


def test_cli_residual(capsys):
    code = run_cli(
        ["residual", "--N", "2", "--p", "1.6", "--beta", "0.05", "--nt", "16",
         "--nr", "16"]
    )
    assert code == 0
    pay = json.loads(capsys.readouterr().out)
    assert set(pay) == {"sup_residual", "l2_residual", "refinement_order", "excluded_cells"}


def test_cli_check_passes(capsys):
    assert run_cli(["check", "--N", "2", "--p", "1.6", "--betas", "0.05,0.5"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
