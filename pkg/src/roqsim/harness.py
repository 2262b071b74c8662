"""Calibration and experiment sweeps over the single-run simulator.

Thresholds for the congestion-bit monitor come from an attack-free
calibration run: each is 1.5x the per-node per-interval mean of the matching
counter, with a floor of 3 on the retransmission threshold so sparse noise
cannot trip it.  Sweeps vary either the attacker count or the attack period,
run every (value, defense, seed) point, and emit one CSV row per point.
"""

import csv
from concurrent.futures import ProcessPoolExecutor

from .config import DEFENSE_MLDA, DEFENSE_NONE, DEFENSE_SHREW, config_from_dict
from .defense import Thresholds
from .metrics import packet_loss
from .runner import SimulationRun, run_simulation

RESULTS_HEADER = (
    "axis",
    "value",
    "defense",
    "seed",
    "legit_bw_bps",
    "legit_loss_pkts",
    "legit_loss_ratio",
    "attack_bw_bps",
    "blocked_nodes",
    "false_blocks",
)

DETECTIONS_HEADER = ("interval", "node", "cb", "status", "action")

CALIBRATION_MARGIN = 1.5
RETRANS_FLOOR = 3.0


def attack_free(config):
    """Same network with the attack disabled and no defense active."""
    d = config.to_dict()
    d["defense"] = DEFENSE_NONE
    d["attack"]["period_s"] = 0.0
    return config_from_dict(d)


def thresholds_from_samples(rc_samples, se_samples_s, re_samples, interval_s=1.0):
    """Fold per-node per-interval counter samples into detection thresholds."""
    if not rc_samples:
        raise ValueError("no calibration samples")
    n = float(len(rc_samples))
    rc_th = CALIBRATION_MARGIN * (sum(rc_samples) / n)
    se_th_s = CALIBRATION_MARGIN * (sum(se_samples_s) / n)
    re_th = max(RETRANS_FLOOR, CALIBRATION_MARGIN * (sum(re_samples) / n))
    return Thresholds(rc_th=rc_th, se_th_s=se_th_s, re_th=re_th, interval_s=interval_s)


def calibrate_thresholds(config):
    """Measure attack-free per-interval counter means and scale them.

    Refuses configs with an active attack: thresholds learned under attack
    would bake the anomaly into the baseline.
    """
    if config.attack_enabled():
        raise ValueError("calibration requires an attack-free config")
    cfg = attack_free(config)
    run = SimulationRun(cfg, collect_intervals=True)
    result = run.execute()
    first = int(cfg.warmup_s / cfg.mlda.interval_s) + 1
    legit = set(cfg.legit_nodes())
    rc, se, re = [], [], []
    for rec in result.interval_records:
        if rec.index < first or rec.node not in legit:
            continue
        rc.append(rec.server_rts_cts)
        se.append(rec.busy_stop_us / 1e6)
        re.append(rec.retrans)
    return thresholds_from_samples(rc, se, re, interval_s=cfg.mlda.interval_s)


def resolve_thresholds(config):
    """Use explicitly configured thresholds if complete, else calibrate."""
    m = config.mlda
    if m.rc_th is not None and m.se_th_s is not None and m.re_th is not None:
        return Thresholds(m.rc_th, m.se_th_s, m.re_th, m.interval_s)
    return calibrate_thresholds(attack_free(config))


def _point_config(config, axis, value, defense, seed):
    d = config.to_dict()
    d["defense"] = defense
    d["seed"] = seed
    if axis == "attackers":
        d["attack"]["count"] = int(value)
    elif axis == "period":
        d["attack"]["period_s"] = float(value)
    else:
        raise ValueError("unknown sweep axis %r" % axis)
    return d


def run_point(args):
    """One sweep point; module-level so process pools can pickle it."""
    axis, value, defense, seed, cfg_dict, thresholds = args
    cfg = config_from_dict(cfg_dict)
    result = run_simulation(cfg, thresholds=thresholds)
    loss_pkts, loss_ratio = packet_loss(result.legit)
    return (
        axis,
        value,
        defense,
        seed,
        round(result.legit_bw_bps, 3),
        loss_pkts,
        round(loss_ratio, 6),
        round(result.attack_bw_bps, 3),
        len(result.blocked),
        result.false_blocks,
    )


def _run_points(points, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_point, points))
    return [run_point(p) for p in points]


def _sweep(config, axis, values, workers=1):
    config.validate()
    thresholds = resolve_thresholds(config)
    points = []
    for value in values:
        for defense in (DEFENSE_MLDA, DEFENSE_SHREW):
            for seed in config.sweep.seeds:
                points.append(
                    (axis, value, defense, seed,
                     _point_config(config, axis, value, defense, seed), thresholds)
                )
    rows = _run_points(points, workers)
    rows.sort(key=lambda r: (float(r[1]), r[2], r[3]))
    return rows, thresholds


def sweep_attackers(config, workers=1):
    """Vary the number of attackers at a fixed attack period."""
    return _sweep(config, "attackers", config.sweep.attacker_counts, workers=workers)


def sweep_period(config, workers=1):
    """Vary the attack period; period 0 means no attack."""
    return _sweep(config, "period", config.sweep.periods_s, workers=workers)


def aggregate_rows(rows):
    """Mean/min/max of legit bandwidth and loss ratio per (value, defense)."""
    groups = {}
    for r in rows:
        groups.setdefault((float(r[1]), r[2]), []).append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        bws = [r[4] for r in rs]
        ratios = [r[6] for r in rs]
        losses = [r[5] for r in rs]
        blocked = [r[8] for r in rs]
        false = [r[9] for r in rs]
        out[key] = {
            "n": len(rs),
            "legit_bw_mean": sum(bws) / len(bws),
            "legit_bw_min": min(bws),
            "legit_bw_max": max(bws),
            "loss_ratio_mean": sum(ratios) / len(ratios),
            "loss_pkts_mean": sum(losses) / len(losses),
            "blocked_mean": sum(blocked) / len(blocked),
            "false_blocks_total": sum(false),
        }
    return out


def write_results_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        for r in rows:
            w.writerow(r)


def write_detections_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DETECTIONS_HEADER)
        for r in rows:
            w.writerow(r)
