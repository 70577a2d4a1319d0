import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SPECS
from lenscat import __version__
from lenscat.harness import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_METRIC,
    EXIT_OK,
    EXIT_SUPPORT,
    EXIT_TRAPPED,
    ConfigError,
    ExperimentConfig,
    main,
)
from lenscat.metric import load_diffeo, load_metric, pullback


def spec(name):
    return os.path.join(SPECS, name + ".json")


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0]
    cols = lines[1].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    return header, cols, rows


# ---------------------------------------------------------------------------
# configuration


@settings(max_examples=40, deadline=None)
@given(command=st.sampled_from(["scatter", "sojourn", "check"]),
       rays=st.none() | st.integers(1, 10**6), seed=st.integers(0, 2**32),
       tol=st.floats(1e-12, 1.0), lmax=st.none() | st.floats(1.0, 1e4),
       fmt=st.sampled_from(["csv", "json"]), strict=st.booleans())
def test_config_roundtrip(command, rays, seed, tol, lmax, fmt, strict):
    cfg = ExperimentConfig(command, metric="m.json", rays=rays, seed=seed, tol=tol, lmax=lmax,
                           format=fmt, strict=strict)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


@pytest.mark.parametrize("kw", [
    {"command": "fly", "metric": "m"},
    {"command": "scatter"},
    {"command": "scatter", "metric": "m", "tol": 0.0},
    {"command": "scatter", "metric": "m", "rays": 0},
    {"command": "scatter", "metric": "m", "workers": 0},
    {"command": "scatter", "metric": "m", "format": "xml"},
    {"command": "compare", "metric": "m"},
    {"command": "compare", "metric": "m", "metric2": "a", "diffeo": "b"},
    {"command": "pullback", "metric": "m"},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_config_digest_ignores_workers_and_output():
    a = ExperimentConfig("scatter", metric=spec("bump"), workers=1, out="a.csv")
    b = ExperimentConfig("scatter", metric=spec("bump"), workers=8, out="b.csv")
    c = ExperimentConfig("scatter", metric=spec("flat"))
    assert a.digest() == b.digest() != c.digest()


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "scatter", "metric": spec("bump"), "rays": 3}))
    out = tmp_path / "x.csv"
    assert main(["scatter", "--config", str(cfg), "--rays", "5", "--out", str(out)]) == EXIT_OK
    assert len(read_csv(out)[2]) == 5
    cfg.write_text("[1, 2]")
    assert main(["scatter", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["scatter", "--config", str(cfg)]) == EXIT_CONFIG


# ---------------------------------------------------------------------------
# exit codes


def test_exit_config_errors(tmp_path, capsys):
    assert main(["scatter"]) == EXIT_CONFIG
    assert main(["scatter", "--metric", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 2, "R": 3, "T": 1, "family": "mystery"}))
    assert main(["scatter", "--metric", str(bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "config"
    with pytest.raises(SystemExit) as info:
        main(["launch"])
    assert info.value.code == 2


def test_exit_metric_invalid(tmp_path, capsys):
    neg = tmp_path / "neg.json"
    neg.write_text(json.dumps({"dim": 2, "R": 3.0, "T": 1.0, "family": "rank_one_bump",
                               "params": {"amplitude": -2.0, "center": [0.0, 0.0]}}))
    assert main(["scatter", "--metric", str(neg)]) == EXIT_METRIC
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"dim": 2, "R": 3.0, "T": 1.0, "family": "conformal_bump",
                               "params": {"support_radius": 4.0}}))
    assert main(["check", "--metric", str(big)]) == EXIT_METRIC
    assert main(["compare", "--metric", spec("bump"), "--diffeo", spec("oversized_swirl")]) == EXIT_METRIC
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "metric"


def test_exit_trapped_strict(capsys):
    code = main(["scatter", "--metric", spec("trapping"), "--strict", "--rays", "30"])
    assert code == EXIT_TRAPPED
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["trapped"] > 0
    first = summary["offending"][0]
    assert first["status"] == 1 and first["length"] > summary["L_max"] and len(first["z"]) == 2
    assert main(["scatter", "--metric", spec("trapping"), "--rays", "30"]) == EXIT_OK


def test_exit_support_violation(tmp_path, capsys):
    code = main(["pullback", "--metric", spec("bump"), "--diffeo", spec("oversized_swirl"),
                 "--out", str(tmp_path / "p.json")])
    assert code == EXIT_SUPPORT
    assert not (tmp_path / "p.json").exists()


# ---------------------------------------------------------------------------
# commands


def test_scatter_flat(tmp_path, capsys):
    out = tmp_path / "lens.csv"
    assert main(["scatter", "--metric", spec("flat"), "--rays", "100", "--out", str(out)]) == EXIT_OK
    header, cols, rows = read_csv(out)
    assert header.startswith(f"# lenscat {__version__} config=") and "columns=t,z_in_1" in header
    assert cols[-2:] == ["length", "sojourn"] and len(rows) == 100
    assert np.max(np.abs(rows[:, -1])) < 1e-13
    summary = json.loads(capsys.readouterr().err)
    assert summary["rays"] == 100 and summary["trapped"] == 0 and summary["max_length"] <= 6.0


def test_scatter_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["scatter", "--metric", spec("bump"), "--rays", "500", "--seed", "7",
                     "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert main(["scatter", "--metric", spec("bump"), "--rays", "500", "--seed", "8",
                 "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() != b.read_bytes()


def test_trapped_rows_are_masked(tmp_path, capsys):
    out = tmp_path / "t.csv"
    main(["scatter", "--metric", spec("trapping"), "--rays", "30", "--out", str(out)])
    _, cols, rows = read_csv(out)
    bad = np.isnan(rows[:, -1])
    assert bad.any() and not np.isnan(rows[:, :5]).any()


def test_scatter_json_and_stdout(capsys):
    assert main(["scatter", "--metric", spec("flat"), "--rays", "2", "--format", "json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["version"] == __version__ and len(data["rows"]) == 2
    assert data["columns"][0] == "t"


def test_sojourn_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sojourn", "--metric", spec("bump"), "--rays", "20", "--out", str(out)]) == EXIT_OK
    _, cols, rows = read_csv(out)
    c = {name: rows[:, k] for k, name in enumerate(cols)}
    assert np.max(np.abs(c["extrapolated"] - c["sojourn_closed"])) < 1e-6
    assert np.max(np.abs(c["sojourn_limit"] - c["sojourn_closed"])) < 1e-3
    assert main(["sojourn", "--metric", spec("bump"), "--smax", "5"]) == EXIT_CONFIG


def test_compare_controls(tmp_path, capsys):
    assert main(["compare", "--metric", spec("flat"), "--metric2", spec("flat")]) == EXIT_OK
    same = json.loads(capsys.readouterr().out)
    assert same["equivalent"] and same["max_normalized"] == 0.0 and same["max_n1"] == 0.0
    out = tmp_path / "g.csv"
    code = main(["compare", "--metric", spec("flat"), "--metric2", spec("bump"), "--tol", "1e-5",
                 "--out", str(out)])
    assert code == EXIT_FAIL
    rep = json.loads(capsys.readouterr().out)
    assert not rep["equivalent"] and rep["max_n1"] > 1e-3 and rep["n_samples"] == 576
    h1, cols, g1 = read_csv(out)
    _, _, g2 = read_csv(tmp_path / "g.2.csv")
    assert cols[-1] == "n1" and len(g1) == len(g2) == 576
    assert np.max(np.abs(g1[:, -1])) < 1e-13 and np.max(np.abs(g2[:, -1])) > 1e-3


def test_compare_pullback_by_shear(capsys):
    code = main(["compare", "--metric", spec("bump"), "--diffeo", spec("shear"), "--tol", "1e-5"])
    rep = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK and rep["equivalent"] and rep["n_samples"] == 576
    assert rep["max_length"] < 1e-8


def test_compare_random_rays(capsys):
    assert main(["compare", "--metric", spec("bump"), "--diffeo", spec("swirl"),
                 "--rays", "40", "--seed", "3"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["n_samples"] == 40


def test_check_commands(tmp_path, capsys):
    assert main(["check", "--metric", spec("flat"), "--rays", "50"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["admissibility"]["min_hessian_eig"] - 2.0) < 1e-9
    assert rep["non_trapping"]["certificate"] and rep["passed"]
    assert main(["check", "--metric", spec("bump"), "--f", spec("linear"), "--rays", "50"]) == EXIT_FAIL
    rep = json.loads(capsys.readouterr().out)
    assert not rep["admissibility"]["admissible"] and rep["non_trapping"]["certificate"]
    assert main(["check", "--metric", spec("bump"), "--rays", "50"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert 0 < rep["admissibility"]["min_hessian_eig"] < 2.0
    assert main(["check", "--metric", spec("trapping"), "--rays", "50"]) == EXIT_FAIL
    assert not json.loads(capsys.readouterr().out)["non_trapping"]["certificate"]
    assert main(["check", "--metric", spec("bump3"), "--f", spec("linear"), "--rays", "5"]) == EXIT_CONFIG


def test_pullback_identity(tmp_path, capsys):
    out = tmp_path / "id.json"
    assert main(["pullback", "--metric", spec("flat"), "--diffeo", spec("identity"),
                 "--out", str(out), "--grid-step", "0.1"]) == EXIT_OK
    tab = load_metric(out)
    rng = np.random.default_rng(0)
    g = tab.metric(rng.uniform(-1, 1, 100), rng.uniform(-3, 3, (100, 2)))
    assert np.max(np.abs(g - np.eye(2))) <= 1e-12


def test_pullback_probes(tmp_path, capsys):
    out = tmp_path / "pb.json"
    assert main(["pullback", "--metric", spec("bump"), "--diffeo", spec("shear"),
                 "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["grid_step"] == pytest.approx(0.03) and summary["time_step"] == pytest.approx(0.015)
    direct = pullback(load_metric(spec("bump")), load_diffeo(spec("shear")))
    tab = load_metric(out)
    rng = np.random.default_rng(1)
    t, z = rng.uniform(-1, 1, 100), rng.uniform(-2.1, 2.1, (100, 2))
    assert np.max(np.abs(tab.metric(t, z) - direct.metric(t, z))) <= 1e-6


def test_worker_env_and_entry_point(tmp_path):
    out1, out2 = tmp_path / "1.csv", tmp_path / "2.csv"
    env = dict(os.environ, LENSCAT_WORKERS="2")
    cmd = [sys.executable, "-m", "lenscat.cli", "scatter", "--metric", spec("bump"), "--rays", "20"]
    r1 = subprocess.run(cmd + ["--out", str(out1)], env=env, capture_output=True, text=True)
    r2 = subprocess.run(cmd + ["--out", str(out2), "--workers", "1"], capture_output=True, text=True)
    assert r1.returncode == r2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    r3 = subprocess.run(["lenscat", "compare", "--metric", spec("flat"), "--metric2", spec("bump"),
                         "--rays", "10"], capture_output=True, text=True)
    assert r3.returncode == 1 and json.loads(r3.stdout)["equivalent"] is False
