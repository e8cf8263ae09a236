import csv
import subprocess
import sys
import time

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from prbeam.channel import make_default_grids
from prbeam.cli import main
from prbeam.config import load_config, parse_angle_spec, parse_config_text, parse_gain_spec
from prbeam.environment import Trace
from prbeam.errors import ConfigError, TraceFormatError
from prbeam.runner import CSV_COLUMNS, SUMMARY_COLUMNS, load_trace, run_experiment, write_trace

BASE = """
[experiment]
horizon = {T}
repetitions = {reps}
seed = 4
output = out.csv
policies = {policies}

[array]
num_elements = 16
wavelength = 0.011
spacing = 0.005
num_beams = {K}

[channel]
thetas_deg = 60
gains = 0.3
sigma = 3.6

[grid]
preset = deepsense-like

[policy.pr-etc]
M = 5
"""


def write_config(tmp_path, name="exp.ini", T=20, reps=2, K=16, policies="uniform, ucb, pr-etc", extra=""):
    path = tmp_path / name
    path.write_text(BASE.format(T=T, reps=reps, K=K, policies=policies) + extra)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_range_specs():
    assert parse_angle_spec("0:2:4") == {"start": 0.0, "step": 2.0, "count": 4}
    assert parse_angle_spec("10, 20") == [10.0, 20.0]
    assert parse_gain_spec("exp(-3:0.5:3)") == {"log_start": -3.0, "log_step": 0.5, "count": 3}
    assert parse_gain_spec("0.5, 1") == [0.5, 1.0]
    grid = make_default_grids({"angles": parse_angle_spec("0:2:4"), "gains": parse_gain_spec("exp(-3:0.5:3)")})
    assert np.allclose(grid.angles_deg, [0.0, 2.0, 4.0, 6.0], rtol=0, atol=1e-12)
    assert np.allclose(grid.gains.real, np.exp([-3.0, -2.5, -2.0]))
    with pytest.raises(ConfigError):
        parse_angle_spec("abc")
    with pytest.raises(ConfigError):
        parse_gain_spec("exp(1, 2)")


def test_config_defaults_and_policies(tmp_path):
    cfg = load_config(write_config(tmp_path))
    assert cfg.horizon == 20 and cfg.repetitions == 2 and cfg.seed == 4
    assert [p.label for p in cfg.policies] == ["uniform", "ucb", "pr-etc"]
    assert cfg.policies[2].M == 5
    assert cfg.output == tmp_path / "out.csv"
    assert cfg.env.thetas_deg == (60.0,)


@pytest.mark.parametrize("text, fragment", [
    ("[channel]\nsigma = 1\n", "[experiment]"),
    ("[experiment]\npolicies = ucb\nhorizon = abc\n[channel]\nthetas_deg = 10\ngains = 1\n", "horizon"),
    ("[experiment]\npolicies = ucb\nhorizon = 0\n[channel]\nthetas_deg = 10\ngains = 1\n", "horizon"),
    ("[experiment]\nhorizon = 5\n[channel]\nthetas_deg = 10\ngains = 1\n", "no policies"),
    ("[experiment]\npolicies = ucb\n", "[channel] or [trace]"),
    ("[experiment]\npolicies = ucb\n[channel]\nthetas_deg = 10, 20\ngains = 1\n", "same length"),
    ("[experiment]\npolicies = pr-etc\n[channel]\nthetas_deg = 10\ngains = 1\n[policy.pr-etc]\nM = x\n", "M"),
    ("[experiment]\npolicies = ucb\n[trace]\npath = missing.csv\n", "does not exist"),
])
def test_config_errors_are_diagnostic(tmp_path, text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text, base=tmp_path)
    assert fragment in str(exc.value)


def test_trace_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tr = Trace(rng.normal(20, 5, size=(6, 4)), ticks=[0, 3, 4, 9, 10, 20])
    write_trace(tmp_path / "t.csv", tr)
    back = load_trace(tmp_path / "t.csv")
    assert_array_equal(back.rss, tr.rss)
    assert_array_equal(back.ticks, tr.ticks)


def test_minimal_trace_file(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("tick,beam_0,beam_1\n0,1.5,2.5\n1,3.0,-4\n")
    tr = load_trace(p)
    assert tr.num_beams == 2 and len(tr.rss) == 2


@pytest.mark.parametrize("body, fragment", [
    ("tick,beam_0,beam_1\n0,1.0,abc\n1,2,3\n", "'beam_1'"),
    ("tick,beam_0,beam_2\n0,1,2\n", "beam_1"),
    ("time,beam_0\n0,1\n", "tick"),
    ("tick,beam_0\n1,1\n1,2\n", "increasing"),
    ("tick,beam_0\n0,1,2\n", "cells"),
    ("tick,beam_0\n", "no data"),
    ("", "empty"),
    ("tick,beam_0\n0,inf\n", "finite"),
])
def test_trace_format_errors(tmp_path, body, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(TraceFormatError) as exc:
        load_trace(p)
    assert fragment in str(exc.value)


def test_smallest_run(tmp_path):
    cfg = load_config(write_config(tmp_path, T=1, reps=1, K=1, policies="uniform"))
    report = run_experiment(cfg)
    rows = read_rows(tmp_path / "out.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 2
    row = dict(zip(rows[0], rows[1]))
    assert row["beam"] == "0" and float(row["inst_regret"]) == 0.0 and float(row["cum_regret"]) == 0.0
    # one beam leaves no gap to normalize by
    assert row["norm_regret"] == "nan"
    assert report.final_normalized("uniform").size == 1


def test_csv_layout_and_summary(tmp_path):
    cfg = load_config(write_config(tmp_path, T=7, reps=3))
    run_experiment(cfg)
    rows = read_rows(tmp_path / "out.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 3 * 7 * 3
    keys = [(int(r[0]), int(r[1])) for r in rows[1:]]
    assert keys == sorted(keys)
    assert [r[2] for r in rows[1:4]] == ["uniform", "ucb", "pr-etc"]
    for r in rows[1:]:
        assert 0 <= int(r[3]) < 16
        assert float(r[5]) >= 0
    summary = read_rows(tmp_path / "out_summary.csv")
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert [r[0] for r in summary[1:]] == ["uniform", "ucb", "pr-etc"]


def test_adding_a_policy_does_not_change_others(tmp_path):
    a = run_experiment(load_config(write_config(tmp_path, "a.ini", policies="ucb, pr-etc")), write=False)
    b = run_experiment(load_config(write_config(tmp_path, "b.ini", policies="pr-etc")), write=False)
    assert_array_equal(a.traces("pr-etc")[1].actions, b.traces("pr-etc")[1].actions)


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", str(cfg)]) == 0
    assert "pr-etc" in capsys.readouterr().out
    assert (tmp_path / "out.csv").is_file()
    assert main(["run", str(tmp_path / "nope.ini")]) == 1
    assert "prbeam: error:" in capsys.readouterr().err
    assert main(["trace-run", str(cfg)]) == 1
    assert "[trace]" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code != 0


def test_cli_workers_byte_identical(tmp_path):
    cfg = write_config(tmp_path, reps=4)
    assert main(["run", str(cfg), "-o", str(tmp_path / "one.csv"), "-j", "1"]) == 0
    assert main(["run", str(cfg), "-o", str(tmp_path / "two.csv"), "-j", "2"]) == 0
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path, policies="uniform")
    main(["run", str(cfg), "-o", str(tmp_path / "a.csv")])
    main(["run", str(cfg), "-o", str(tmp_path / "b.csv"), "--seed", "99"])
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_cli_sweep(tmp_path):
    cfg = write_config(tmp_path, policies="uniform, pr-etc", extra="\n[sweep]\nseeds = 1, 2\nhorizons = 5, 8\n")
    outdir = tmp_path / "sw"
    assert main(["sweep", str(cfg), "--outdir", str(outdir)]) == 0
    summary = read_rows(outdir / "sweep_summary.csv")
    assert summary[0] == ["policy", "horizon", "seed", "final_norm_regret_mean", "final_norm_regret_stderr",
                          "ms_per_step"]
    assert len(summary) == 1 + 2 * 2 * 2
    assert {(r[1], r[2]) for r in summary[1:]} == {("5", "1"), ("5", "2"), ("8", "1"), ("8", "2")}
    rows = read_rows(outdir / "T8_seed2.csv")
    assert len(rows) == 1 + 2 * 8 * 2


def test_cli_trace_run(tmp_path):
    rng = np.random.default_rng(1)
    write_trace(tmp_path / "t.csv", Trace(rng.normal(20, 5, size=(3, 16))))
    text = BASE.format(T=30, reps=2, K=16, policies="pr-etc, periodic-pr-etc").replace(
        "[channel]\nthetas_deg = 60\ngains = 0.3\nsigma = 3.6", "[trace]\npath = t.csv\nfactor = 15")
    (tmp_path / "tr.ini").write_text(text)
    assert main(["trace-run", str(tmp_path / "tr.ini")]) == 0
    rows = read_rows(tmp_path / "out.csv")
    assert len(rows) == 1 + 2 * 30 * 2
    assert main(["run", str(tmp_path / "tr.ini")]) == 1


def test_cli_verify_assumptions(tmp_path, capsys):
    text = """
[experiment]
horizon = 1000
seed = 11
output = inst.csv
policies = pr-etc
[array]
num_beams = 8
[channel]
thetas_deg = 70
gains = 0.5
sigma = 1.0
[grid]
angles = 30:20:8
gains = 0.25, 0.5, 1, 2
"""
    (tmp_path / "a.ini").write_text(text)
    assert main(["verify-assumptions", str(tmp_path / "a.ini"), "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert "C1=" in out and "C3=" in out and "theoretical exploration length" in out
    rows = dict(read_rows(tmp_path / "inst_assumptions.csv")[1:])
    assert rows["assumption2_feasible"] == "1"
    # ceil(1000^(2/3) * (1 * 1 * (ln 4 + ln 8))^(1/3)) = ceil(100 * 1.5131) = 152
    assert int(rows["theoretical_M"]) == 152
    assert 0.0 <= float(rows["concentration_coverage"]) <= 1.0
    (tmp_path / "r.ini").write_text(text.replace("thetas_deg = 70", "thetas_deg = random"))
    assert main(["verify-assumptions", str(tmp_path / "r.ini")]) == 1


def test_log_level_env(tmp_path):
    cfg = write_config(tmp_path, policies="uniform")
    res = subprocess.run([sys.executable, "-m", "prbeam.cli", "run", str(cfg)], capture_output=True, text=True,
                         env={"PRBEAM_LOG_LEVEL": "INFO", "PATH": ""})
    assert res.returncode == 0
    assert "INFO prbeam" in res.stderr


def test_full_scale_timing(tmp_path, capsys):
    cfg = tmp_path / "big.ini"
    cfg.write_text(BASE.format(T=200, reps=1, K=180, policies="pr-etc").replace(
        "deepsense-like", "deepmimo-like").replace("M = 5", "M = 20"))
    start = time.perf_counter()
    report = run_experiment(load_config(cfg), write=False)
    wall = time.perf_counter() - start
    with capsys.disabled():
        print(f"\nPR-ETC K=180 T=200: {report.ms_per_step['pr-etc']:.3f} ms/step, {wall:.2f} s including setup")
    assert report.ms_per_step["pr-etc"] < 100
