import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from membrane_lab.cli import run_experiment
from membrane_lab.snapshot import import_snapshot


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_verify_exact_passes_and_writes_artifacts(tmp_path, capsys):
    code = run_experiment(["verify-exact", "--out", str(tmp_path)])
    assert code == 0
    s = _summary(tmp_path)
    assert s["schema"] == 1 and s["experiment"] == "verify-exact" and s["passed"] is True
    assert set(s["artifacts"]) == {"residuals.csv", "causal.csv", "plot.gp"}
    for key in ("checks", "results", "config", "seed", "version", "started", "elapsed_s"):
        assert key in s
    assert "PASS  hyperplane_exact_zero" in capsys.readouterr().out
    plot = (tmp_path / "plot.gp").read_text()
    assert "'residuals.csv'" in plot
    with open(tmp_path / "residuals.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["case", "dim", "points", "spacing", "residual", "order"]


def test_failed_check_exits_one(tmp_path):
    # a single Newton step cannot show three convergence orders
    code = run_experiment(["nash-moser", "--out", str(tmp_path), "--override", "nash_moser.m_max=1"])
    assert code == 1
    s = _summary(tmp_path)
    assert s["passed"] is False and s["checks"]["three_orders_in_band"] is False


def test_bad_config_exits_two_with_record(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[physics]\np = 0.4\n")
    out = tmp_path / "out"
    code = run_experiment(["stability", "--config", str(cfg), "--out", str(out)])
    assert code == 2
    err = _summary(out)["error"]
    assert err["exit_code"] == 2 and err["type"] == "ConfigError"
    assert err["message"] == "line 2: p must exceed 1/2, got 0.4"
    assert "p must exceed" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path):
    assert run_experiment(["verify-exact", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2


def test_bad_thread_setting_exits_two(tmp_path, monkeypatch):
    monkeypatch.setenv("MEMBRANE_LAB_THREADS", "0")
    assert run_experiment(["nash-moser", "--out", str(tmp_path)]) == 2


def test_thread_cap_accepted(tmp_path, monkeypatch):
    monkeypatch.setenv("MEMBRANE_LAB_THREADS", "1")
    assert run_experiment(["nash-moser", "--out", str(tmp_path)]) == 0


def test_unknown_experiment_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run_experiment(["teleport"])
    assert exc.value.code == 2


def test_zero_amplitude_stability_stays_zero(tmp_path):
    args = ["stability", "--out", str(tmp_path), "--override", "physics.eps=0", "--override", "solver.t_end=2"]
    run_experiment(args)
    s = _summary(tmp_path)
    assert s["checks"]["zero_data_stays_zero"] is True
    with open(tmp_path / "stability.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["inner_H1"]) == 0.0 and float(r["box_H1"]) == 0.0 and float(r["mass"]) == 0.0 for r in rows)


def test_snapshots_written_and_readable(tmp_path):
    args = ["stability", "--out", str(tmp_path), "--override", "output.snapshots=true", "--override", "solver.t_end=2"]
    run_experiment(args)
    assert "perturbation.snap" in _summary(tmp_path)["artifacts"]
    f = import_snapshot(tmp_path / "perturbation.snap")
    assert f.grid.dim == 2 and np.all(np.isfinite(f.values))


@pytest.mark.parametrize("experiment", ["linear-decay", "tame-sweep"])
def test_fixed_seed_is_byte_identical(tmp_path, experiment):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    extra = ["--override", "solver.draws=2", "--override", "solver.t_end=20"] if experiment == "linear-decay" else []
    for out, seed in ((a, "7"), (b, "7"), (c, "8")):
        run_experiment([experiment, "--out", str(out), "--seed", seed] + extra)
    names = sorted(p.name for p in a.glob("*.csv"))
    assert names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert any((a / n).read_bytes() != (c / n).read_bytes() for n in names)
    assert _summary(a)["seed"] == 7


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "membrane_lab.cli", "nash-moser", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "nash-moser: all checks passed" in proc.stdout
