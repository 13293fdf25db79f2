import json
import math
from dataclasses import replace

import pytest

from qalleles.errors import ConfigError
from qalleles.harness import cli
from qalleles.harness.config import RunConfig, load, read_config_file, resolve
from qalleles.harness.presets import PRESETS
from qalleles.harness.rng import SplitMix64
from qalleles.harness.runner import SweepSpec, check_hypotheses, run_single, run_sweep

FAST = {"nx": "31", "ny": "31", "t_max": "0.2", "sample_interval": "0.1"}


def fast(preset, **over):
    vals = {"preset": preset, **FAST, **{k: str(v) for k, v in over.items()}}
    return resolve({}, vals)


# ---- rng -----------------------------------------------------------------

def test_splitmix64_reference_stream():
    # published SplitMix64 outputs for seed 1234567
    g = SplitMix64(1234567)
    assert [g.next_u64() for _ in range(3)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_uniform_range_and_repeatability():
    g1, g2 = SplitMix64(42), SplitMix64(42)
    s1 = [g1.uniform(-2, 2) for _ in range(1000)]
    s2 = [g2.uniform(-2, 2) for _ in range(1000)]
    assert s1 == s2
    assert all(-2 <= v < 2 for v in s1)


def test_sweep_spec():
    pts = SweepSpec(5, (0, 1, 10, 11), seed=3).starts()
    assert len(pts) == 5 and pts == SweepSpec(5, (0, 1, 10, 11), seed=3).starts()
    assert all(0 <= x < 1 and 10 <= y < 11 for x, y in pts)
    with pytest.raises(ValueError):
        SweepSpec(0)


# ---- configuration -------------------------------------------------------

def test_precedence(tmp_path):
    f = tmp_path / "a.cfg"
    f.write_text("# comment\npreset = example2\nepsilon = 0.1  # inline\nnx = 51\nny=51\n")
    cfg = load(str(f), epsilon="0.2")
    assert cfg.m == "(x+y)^2"          # from the preset
    assert cfg.nx == 51                 # file beats preset
    assert cfg.epsilon == 0.2           # CLI beats file
    assert cfg.r == 40.0                # default


def test_unknown_key_and_bad_values(tmp_path):
    f = tmp_path / "b.cfg"
    f.write_text("epsilonn = 0.1\n")
    with pytest.raises(ConfigError):
        read_config_file(str(f))
    for bad in ({"epsilon": "-1"}, {"nx": "2"}, {"mode": "triploid"}, {"r": "abc"},
                {"ic": "1"}, {"preset": "nope"}, {"x_min": "3"}, {"sweep_count": "0"},
                {"snapshot_times": "5"}, {"epsilon": "nan"}):
        with pytest.raises(ConfigError):
            resolve({}, bad)
    with pytest.raises(ConfigError):
        resolve({}, {"mode": "diploid", "nx": "31", "ny": "41"})


def test_ic_parsing():
    cfg = resolve({}, {"ic": "-0.3,1.3;0.7,-0.5:2"})
    assert [(b.x0, b.y0, b.weight) for b in cfg.ic] == [(-0.3, 1.3, 1.0), (0.7, -0.5, 2.0)]


def test_resolved_text_round_trips(tmp_path):
    cfg = resolve({}, {"preset": "fig1", "snapshot_times": "0.5,1", "target_mass": "35"})
    path = tmp_path / "resolved.cfg"
    path.write_text(cfg.to_text())
    assert load(str(path)) == cfg


def test_every_preset_resolves():
    for name in PRESETS:
        cfg = resolve({}, {"preset": name})
        assert cfg.preset == name
        if name != "bv":
            assert cfg.t_max == 3.0


# ---- hypotheses ----------------------------------------------------------

def test_check_example1():
    rep = check_hypotheses(resolve({}, {"preset": "example1"}))
    assert rep["H1"]["pass"] and rep["H1"]["four_sup_m"] == 32.0
    assert rep["H3"]["pass"] and rep["H3"]["rho0"] == pytest.approx(36.0)
    assert rep["H4"]["pass"]
    assert abs(rep["H4"]["nu0_min"] - 1) <= 1e-10 and abs(rep["H4"]["nu0_max"] - 1) <= 1e-10


def test_check_hyperbola_fails_h1():
    rep = check_hypotheses(resolve({}, {"preset": "example3"}))
    assert not rep["H1"]["pass"] and rep["H1"]["four_sup_m"] == 100.0
    assert rep["H4"]["pass"] is None


def test_check_diploid():
    rep = check_hypotheses(resolve({}, {"preset": "diploid"}))
    assert rep["diploid_symmetry"]["pass"]


# ---- runs ----------------------------------------------------------------

def test_run_single_artifacts(tmp_path):
    cfg = replace(fast("example1", snapshot_times="0.1"), out=str(tmp_path / "r"))
    res = run_single(cfg)
    out = tmp_path / "r"
    names = sorted(p.name for p in out.iterdir())
    assert names == ["canonical.csv", "diagnostics.csv", "field_t0.100000.csv",
                     "resolved.cfg", "summary.json"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["invariants"]["rho_bounds"]["violations"] == 0
    assert summary["invariants"]["positivity"]["samples"] == 3
    assert summary["hypotheses"]["H1"]["pass"]
    assert "closed_form" in summary and "canonical" in summary
    rows = (out / "diagnostics.csv").read_text().splitlines()
    assert rows[0].startswith("t,rho,xbar,ybar") and len(rows) == 4
    assert res.final.t == 0.2
    assert load(str(out / "resolved.cfg")) == cfg


def test_h1_dependent_checks_are_skipped(tmp_path):
    res = run_single(replace(fast("example3"), out=str(tmp_path / "h")))
    inv = res.summary["invariants"]
    assert inv["nu_bounds"]["status"] == "skipped"
    assert inv["u_max_bound"]["status"] == "skipped"
    assert inv["positivity"]["status"] == "checked"


def test_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        cfg = replace(fast("fig1", snapshot_times="0.2"), out=str(tmp_path / f"d{k}"))
        run_single(cfg)
        outs.append(tmp_path / f"d{k}")
    for name in ("diagnostics.csv", "canonical.csv", "field_t0.200000.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


# ---- sweeps --------------------------------------------------------------

def test_sweep_is_deterministic_across_jobs(tmp_path):
    got = []
    for jobs in (1, 2):
        cfg = replace(fast("fig2_sum_sq", epsilon=0.05, sweep_count=3, seed=9, jobs=jobs),
                      out=str(tmp_path / f"s{jobs}"))
        run_sweep(cfg)
        got.append(tmp_path / f"s{jobs}")
    for name in ("sweep.csv", "trajectories.csv"):
        assert (got[0] / name).read_bytes() == (got[1] / name).read_bytes()
    header = (got[0] / "sweep.csv").read_text().splitlines()[0]
    assert header.startswith("index,x0,y0,status,pde_x,pde_y,ode_x,ode_y,discrepancy")


def test_squared_sum_sweep_finals_on_antidiagonal(tmp_path):
    cfg = replace(fast("fig2_squared_sum", epsilon=0.05, sweep_count=3, seed=4,
                       ode_t_max=5000, canonical_dt=0.05), out=str(tmp_path / "q"))
    rows = run_sweep(cfg)["rows"]
    assert all(r["status"] == "ok" for r in rows)
    for r in rows:
        assert abs(r["ode_x_final"] + r["ode_y_final"]) <= 1e-6


def test_hyperbola_sweep_finals_on_hyperbola(tmp_path):
    cfg = replace(fast("fig2_hyperbola", epsilon=0.05, sweep_count=3, seed=5,
                       sweep_box="0.2,2,0.2,2", ode_t_max=3000, canonical_dt=0.05),
                  out=str(tmp_path / "h"))
    rows = run_sweep(cfg)["rows"]
    for r in rows:
        assert r["status"] == "ok"
        assert abs(r["ode_x_final"] * r["ode_y_final"] - 1) <= 1e-6


def test_sweep_records_failures(tmp_path):
    # concave selection makes the canonical curvature degenerate near t = 1
    cfg = replace(fast("fig2_sum_sq", m="4-x^2-y^2", epsilon=0.05, sweep_count=2,
                       ode_t_max=2), out=str(tmp_path / "f"))
    res = run_sweep(cfg)
    assert res["summary"]["failed"] == 2
    assert all(r["status"] == "error:SingularityError" for r in res["rows"])
    text = (tmp_path / "f" / "sweep.csv").read_text().splitlines()
    assert len(text) == 3 and ",nan" in text[1]


# ---- command line --------------------------------------------------------

def _run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_cli_presets(capsys):
    code, out = _run(["presets"], capsys)
    assert code == 0 and "example1" in out.out and "fig2_hyperbola" in out.out


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "c"
    code, cap = _run(["run", "--preset", "example2", "--grid", "31", "--tmax", "0.1",
                      "--out", str(out)], capsys)
    assert code == 0 and (out / "summary.json").exists()
    assert "argmax" in cap.out


def test_cli_syntax_error(tmp_path, capsys):
    code, cap = _run(["run", "--m", "x^2+*y", "--out", str(tmp_path / "e")], capsys)
    assert code == 2
    rec = json.loads(cap.err.strip().splitlines()[-1])
    assert rec["type"] == "ExprSyntaxError" and rec["offset"] == 4
    assert json.loads((tmp_path / "e" / "error.json").read_text()) == rec


def test_cli_config_errors(tmp_path, capsys):
    assert _run(["run", "--grid", "1,2,3"], capsys)[0] == 2
    assert _run(["check", "--epsilon", "-3"], capsys)[0] == 2
    assert _run(["run", "--m", "x^(y)", "--out", str(tmp_path / "d")], capsys)[0] == 2
    assert _run(["run", "--config", str(tmp_path / "missing.cfg")], capsys)[0] == 2


def test_cli_numerical_failure(tmp_path, capsys):
    f = tmp_path / "unstable.cfg"
    f.write_text("preset = example1\nnx = 21\nny = 21\nt_max = 0.05\ncfl = 500\n")
    code, cap = _run(["run", "--config", str(f), "--out", str(tmp_path / "u")], capsys)
    assert code == 3
    assert json.loads(cap.err.strip().splitlines()[-1])["type"] in ("StabilityError",
                                                                    "StateError")


def test_cli_partial_sweep(tmp_path, capsys):
    f = tmp_path / "s.cfg"
    f.write_text("sweep_count = 2\nnx = 21\nny = 21\nt_max = 0.1\nsample_interval = 0.1\n"
                 "m = 4-x^2-y^2\nepsilon = 0.05\node_t_max = 2\n")
    code, _ = _run(["sweep", "--config", str(f), "--seed", "1", "--out", str(tmp_path / "p")],
                   capsys)
    assert code == 4


def test_cli_check(capsys):
    code, cap = _run(["check", "--preset", "example3"], capsys)
    assert code == 0
    assert json.loads(cap.out)["H1"]["four_sup_m"] == 100.0


def test_config_defaults_are_documented():
    import qalleles.harness.config as config
    for name in RunConfig.__dataclass_fields__:
        assert name in config.__doc__, name
    assert math.isclose(RunConfig().cfl, 0.2)
