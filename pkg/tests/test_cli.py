"""Command-line interface: run, sweep, calibrate, and error paths."""

import json
import shutil
import subprocess

import pytest

from roqsim.cli import main

SMALL = {
    "duration_s": 15.0,
    "warmup_s": 5.0,
    "seed": 2,
    "sweep": {"attacker_counts": [2], "periods_s": [0.0], "seeds": [1]},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


def test_run_prints_metrics(config_path, capsys):
    assert main(["run", "--config", config_path]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "defense=none seed=2 window_s=10"
    assert out[1].startswith("legit_bw_bps=")
    assert out[2].startswith("attack_bw_bps=")


def test_run_writes_artifacts(tmp_path, config_path):
    cfgd = dict(SMALL)
    cfgd["defense"] = "mlda"
    cfg2 = tmp_path / "mlda.json"
    cfg2.write_text(json.dumps(cfgd))
    trace = tmp_path / "trace.tsv"
    det = tmp_path / "detections.csv"
    spectra = tmp_path / "spectra.csv"
    rc = main(["run", "--config", str(cfg2), "--trace", str(trace),
               "--detections", str(det), "--dump-spectra", str(spectra)])
    assert rc == 0
    assert trace.stat().st_size > 0
    assert det.read_text().splitlines()[0] == "interval,node,cb,status,action"
    assert spectra.read_text().splitlines()[0] == "flow,bin,freq_hz,energy"


def test_sweep_writes_results(tmp_path, config_path):
    out = tmp_path / "results.csv"
    assert main(["sweep", "attackers", "--config", config_path,
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("axis,value,defense,seed,legit_bw_bps")
    assert len(lines) == 3  # header + (mlda, shrew) x 1 seed x 1 count


def test_calibrate_prints_json(tmp_path, capsys):
    quiet = tmp_path / "quiet.json"
    quiet.write_text(json.dumps(dict(SMALL, attack={"count": 0})))
    assert main(["calibrate", "--config", str(quiet)]) == 0
    th = json.loads(capsys.readouterr().out)
    assert set(th) == {"rc_th", "se_th_s", "re_th", "interval_s"}
    assert th["re_th"] >= 3.0


def test_missing_config_is_a_config_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert "config error" in capsys.readouterr().err


def test_calibrate_refuses_attacked_config(config_path, capsys):
    # thresholds learned under attack would bake the anomaly into the baseline
    assert main(["calibrate", "--config", config_path]) == 2
    assert "run failed" in capsys.readouterr().err


def test_console_script_installed(tmp_path):
    exe = shutil.which("roqsim")
    assert exe, "console script should be on PATH after install"
    quiet = tmp_path / "quiet.json"
    quiet.write_text(json.dumps(dict(SMALL, attack={"count": 0})))
    proc = subprocess.run([exe, "calibrate", "--config", str(quiet)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["re_th"] >= 3.0
