"""Threshold calibration and the sweep/CSV machinery."""

import pytest

from roqsim.config import RunConfig, config_from_dict
from roqsim.harness import (
    DETECTIONS_HEADER,
    RESULTS_HEADER,
    aggregate_rows,
    attack_free,
    calibrate_thresholds,
    resolve_thresholds,
    run_point,
    sweep_attackers,
    thresholds_from_samples,
    write_detections_csv,
    write_results_csv,
)

SMALL = {
    "duration_s": 15.0,
    "warmup_s": 5.0,
    "sweep": {"attacker_counts": [2], "periods_s": [0.0, 5.0], "seeds": [1]},
}


def test_thresholds_from_samples_scale_and_floor():
    th = thresholds_from_samples([20, 40], [0.02, 0.06], [0, 1], interval_s=1.0)
    assert th.rc_th == pytest.approx(45.0)  # 1.5 * mean(30)
    assert th.se_th_s == pytest.approx(0.06)
    assert th.re_th == 3.0  # 1.5 * 0.5 is under the floor
    th2 = thresholds_from_samples([1], [0.0], [4], interval_s=2.0)
    assert th2.re_th == 6.0  # above the floor the scaled mean wins
    assert th2.interval_s == 2.0
    with pytest.raises(ValueError):
        thresholds_from_samples([], [], [])


def test_attack_free_strips_attack_and_defense():
    cfg = config_from_dict({"defense": "mlda", "attack": {"count": 4}})
    quiet = attack_free(cfg)
    assert quiet.defense == "none"
    assert quiet.attack.period_s == 0.0
    assert not quiet.attack_enabled()
    assert cfg.defense == "mlda"  # original untouched


def test_calibration_refuses_active_attack():
    with pytest.raises(ValueError):
        calibrate_thresholds(RunConfig())  # default config has a live attack


def test_calibration_is_deterministic_and_positive():
    cfg = attack_free(config_from_dict(SMALL))
    th1 = calibrate_thresholds(cfg)
    th2 = calibrate_thresholds(cfg)
    assert th1 == th2
    assert th1.rc_th > 0
    assert th1.se_th_s > 0
    assert th1.re_th >= 3.0


def test_resolve_prefers_configured_thresholds():
    cfg = config_from_dict(
        {"mlda": {"rc_th": 9.0, "se_th_s": 0.1, "re_th": 4.0, "interval_s": 2.0}}
    )
    th = resolve_thresholds(cfg)
    assert (th.rc_th, th.se_th_s, th.re_th, th.interval_s) == (9.0, 0.1, 4.0, 2.0)


def test_run_point_row_is_deterministic():
    cfg = config_from_dict(SMALL)
    th = calibrate_thresholds(attack_free(cfg))
    args = ("attackers", 2, "mlda", 1, cfg.to_dict() | {"defense": "mlda"}, th)
    row1 = run_point(args)
    row2 = run_point(args)
    assert row1 == row2
    assert row1[:4] == ("attackers", 2, "mlda", 1)
    assert len(row1) == len(RESULTS_HEADER)


def test_sweep_rows_and_csv_stability(tmp_path):
    cfg = config_from_dict(SMALL)
    rows1, th1 = sweep_attackers(cfg)
    rows2, th2 = sweep_attackers(cfg)
    assert th1 == th2
    assert rows1 == rows2
    assert [r[:4] for r in rows1] == [
        ("attackers", 2, "mlda", 1),
        ("attackers", 2, "shrew", 1),
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results_csv(str(a), rows1)
    write_results_csv(str(b), rows2)
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(RESULTS_HEADER)


def test_parallel_sweep_matches_serial():
    cfg = config_from_dict(SMALL)
    rows_serial, _ = sweep_attackers(cfg, workers=1)
    rows_parallel, _ = sweep_attackers(cfg, workers=2)
    assert rows_serial == rows_parallel


def test_aggregate_rows_means():
    rows = [
        ("attackers", 2, "mlda", 1, 100.0, 2, 0.1, 5.0, 1, 0),
        ("attackers", 2, "mlda", 2, 200.0, 4, 0.3, 5.0, 2, 0),
        ("attackers", 2, "shrew", 1, 50.0, 8, 0.5, 5.0, 0, 1),
    ]
    agg = aggregate_rows(rows)
    m = agg[(2.0, "mlda")]
    assert m["n"] == 2
    assert m["legit_bw_mean"] == pytest.approx(150.0)
    assert m["legit_bw_min"] == 100.0
    assert m["legit_bw_max"] == 200.0
    assert m["loss_pkts_mean"] == pytest.approx(3.0)
    assert m["loss_ratio_mean"] == pytest.approx(0.2)
    assert agg[(2.0, "shrew")]["false_blocks_total"] == 1


def test_detection_csv_writer(tmp_path):
    path = tmp_path / "det.csv"
    write_detections_csv(str(path), [(1, 3, "111", "attacker", "block")])
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(DETECTIONS_HEADER)
    assert lines[1] == "1,3,111,attacker,block"
