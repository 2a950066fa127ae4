import csv
import json
import subprocess
import sys
import time
from importlib.resources import files

import pytest

from bhdimer.cli import SUBCOMMANDS, run
from bhdimer.figures import FIGURES

INVOCATIONS = [[c] for c in SUBCOMMANDS if c != "figure"] + [["figure", f] for f in FIGURES]


def _outputs(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if not p.name.endswith(".manifest.json")}


@pytest.mark.parametrize("argv", INVOCATIONS, ids=lambda a: "-".join(a))
def test_bundled_config_runs_fast_and_reproducibly(argv, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    t0 = time.perf_counter()
    assert run(argv + ["--out-dir", str(a)]) == 0
    assert time.perf_counter() - t0 < 60
    json.loads(capsys.readouterr().out)  # summary on stdout is JSON
    assert run(argv + ["--out-dir", str(b)]) == 0
    out_a = _outputs(a)
    assert out_a and out_a == _outputs(b)

    manifest = json.loads((a / f"{argv[0].replace('-', '_')}.manifest.json").read_text())
    assert manifest["subcommand"] == argv[0]
    assert sorted(manifest["artifacts"]) == sorted(out_a)
    assert "timestamp" in manifest and "version" in manifest and "config" in manifest


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(["no-such-command"]) == 2
    assert run(["figure", "9z"]) == 2
    assert run(["gain", "--threads", "0", "--out-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimer": {"omega_L_GHz": 7.0}}')
    assert run(["steady-state", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "usage error" in capsys.readouterr().err


def test_domain_error_exit_1(tmp_path, capsys):
    cfg = json.loads((files("bhdimer") / "data" / "steady_state.json").read_text())
    cfg["dimer"]["kappa_GHz"] = -0.1
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(cfg))
    assert run(["steady-state", "--config", str(path), "--out-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("PreconditionViolation")


def test_fit_reflection_recovers_published_scale(tmp_path, capsys):
    assert run(["fit-reflection", "--out-dir", str(tmp_path)]) == 0
    r = json.loads((tmp_path / "fit_reflection.json").read_text())
    got = [r["omega_L_GHz"], r["omega_R_GHz"], r["kappa_GHz"], r["J_GHz"]]
    assert got == pytest.approx([7.0, 7.2, 0.29, 0.25], rel=0.01)


def test_figure_1c_labels(tmp_path, capsys):
    assert run(["figure", "1c", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "fig1c_phase_diagram.csv") as fh:
        regions = {row["region"] for row in csv.DictReader(fh)}
    assert regions == {"S", "M", "P"}


def test_phase_diagram_threads_do_not_change_output(tmp_path, capsys):
    assert run(["phase-diagram", "--threads", "1", "--out-dir", str(tmp_path / "one")]) == 0
    assert run(["phase-diagram", "--threads", "3", "--out-dir", str(tmp_path / "three")]) == 0
    assert _outputs(tmp_path / "one") == _outputs(tmp_path / "three")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bhdimer.cli", "circuit", "--out-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "kappa" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "bhdimer.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
