import subprocess
import sys

import pytest

from beampower.cli import main, speedup
from beampower.demand import load_csv

SCENARIO = """\
n_beams = 3
n_steps = 120
train_stop = 60
test_start = 60
test_stop = 120
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "scenario.txt"
    p.write_text(SCENARIO)
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_demand_shape_and_repeatable(tmp_path):
    assert run("gen-demand", "--beams", 30, "--steps", 1440, "--seed", 7, "--out", tmp_path / "a") == 0
    assert run("gen-demand", "--beams", 30, "--steps", 1440, "--seed", 7, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "demand.csv").read_bytes()
    assert a == (tmp_path / "b" / "demand.csv").read_bytes()
    s = load_csv(tmp_path / "a" / "demand.csv")
    assert (s.n_steps, s.n_beams) == (1440, 30)


def test_gen_demand_rejects_zero_steps(capsys):
    with pytest.raises(SystemExit) as exc:
        run("gen-demand", "--steps", 0)
    assert exc.value.code != 0
    assert "positive" in capsys.readouterr().err


def test_train_eval_ga_compare(tmp_path, cfg, capsys):
    out = tmp_path / "train"
    assert run("train", "--config", cfg, "--runs", 2, "--total-timesteps", 128,
               "--n-envs", 2, "--out", out) == 0
    echo = capsys.readouterr().out
    for line in ("gamma = 0.1", "learning_rate = 0.03", "clip_range = 0.2", "lam = 0.8"):
        assert line in echo
    assert sorted(p.name for p in out.glob("run_*")) == ["run_00", "run_01"]

    assert run("eval", "--config", cfg, "--checkpoint", out, "--out", tmp_path / "ev") == 0
    report = (tmp_path / "ev" / "eval_report.txt").read_text()
    assert "runs = 2" in report
    assert (tmp_path / "ev" / "eval_run_01.csv").exists()

    assert run("ga", "--config", cfg, "--stride", 30, "--workers", 1, "--out", tmp_path / "ga") == 0
    summary = (tmp_path / "ga" / "ga_summary.csv").read_text().splitlines()
    assert [int(l.split(",")[0]) for l in summary[1:]] == [125, 250, 375, 500]
    energy = [float(l.split(",")[3]) for l in summary[1:]]
    assert energy == sorted(energy, reverse=True)
    times = [float(l.split(",")[4]) for l in summary[1:]]
    assert times[-1] > times[0]

    capsys.readouterr()
    assert run("compare", "--eval-report", tmp_path / "ev" / "eval_report.txt",
               "--ga-summary", tmp_path / "ga" / "ga_summary.csv") == 0
    assert "speedup = " in capsys.readouterr().out


def test_speedup_ratio():
    assert speedup(3.5, 3.5) == 1.0
    with pytest.raises(ValueError):
        speedup(1.0, 0.0)


def test_eval_dimension_mismatch(tmp_path, cfg, capsys):
    assert run("train", "--config", cfg, "--total-timesteps", 64, "--n-envs", 1, "--out", tmp_path / "t") == 0
    other = tmp_path / "four.txt"
    other.write_text(SCENARIO.replace("n_beams = 3", "n_beams = 4"))
    capsys.readouterr()
    assert run("eval", "--config", other, "--checkpoint", tmp_path / "t", "--out", tmp_path / "e") == 1
    err = capsys.readouterr().err.strip()
    assert "beams" in err and len(err.splitlines()) == 1


@pytest.mark.parametrize("argv", [
    ["train", "--demand", "missing.csv"],
    ["eval", "--checkpoint", "missing.npz"],
    ["ga", "--config", "missing.txt"],
    ["compare", "--eval-report", "missing.txt", "--ga-summary", "x.csv"],
])
def test_missing_inputs_exit_nonzero(tmp_path, argv):
    proc = subprocess.run([sys.executable, "-m", "beampower.cli", *argv, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert len(proc.stderr.strip().splitlines()) == 1
    assert "not found" in proc.stderr


def test_bench_kernels(tmp_path, capsys):
    assert run("bench-kernels", "--rows", 10, "--repeat", 2, "--out", tmp_path) == 0
    assert "identical" in capsys.readouterr().out
    assert "gae" in (tmp_path / "bench_kernels.txt").read_text()
