"""Builds one simulation from a RunConfig, runs it, and collects results.

Node layout: node 0 is the access point, which is also the passive monitor
(it hears every clean RTS/CTS) and the enforcement point (blocked sources get
no CTS and their DATA is discarded).  Legit stations run the TCP-like flows
toward the AP; attacker stations run pulsed senders toward the AP.

Monitoring intervals are always scheduled so that an idle defense leaves the
event pattern of a run untouched; only the defense consumes the snapshots.
"""

from dataclasses import dataclass, field
from typing import Optional

from . import defense as dfs
from . import spectral
from .config import DEFENSE_MLDA, DEFENSE_SHREW, RunConfig
from .kernel import Simulator, to_us
from .mac import (
    CTS,
    DATA,
    OUT_DELIVERED,
    RTS,
    IntervalCounters,
    Medium,
    PhyParams,
    Station,
)
from .metrics import ClassStats, FlowStats, audit_conservation
from .traffic import PulsedSource, TcpSink, TcpSource


@dataclass
class IntervalRecord:
    """One station's view of one monitoring interval (for calibration)."""

    index: int
    node: int
    server_rts_cts: int
    busy_stop_us: int
    retrans: int


@dataclass
class RunResult:
    config: RunConfig
    window_s: float
    flows: dict
    legit: ClassStats
    attack: ClassStats
    blocked: set
    false_blocks: int
    detection_rows: list
    verdicts: list
    thresholds: Optional[dfs.Thresholds]
    interval_records: list = field(default_factory=list)
    timeouts: int = 0

    @property
    def legit_bw_bps(self):
        return self.legit.goodput_bits / self.window_s

    @property
    def attack_bw_bps(self):
        return self.attack.goodput_bits / self.window_s


class SimulationRun:
    """One configured run; call execute() once."""

    def __init__(self, config, thresholds=None, trace=None, collect_intervals=False):
        config.validate()
        self.config = config
        self.trace = trace
        self.collect_intervals = collect_intervals
        self.sim = Simulator(seed=config.seed, trace=trace)
        self.phy = PhyParams(
            slot_us=config.phy.slot_us,
            sifs_us=config.phy.sifs_us,
            difs_us=config.phy.difs_us,
            rate_bps=config.phy.rate_bps,
            cw_min=config.phy.cw_min,
            cw_max=config.phy.cw_max,
            retry_limit=config.phy.retry_limit,
            queue_lifetime_us=to_us(config.phy.queue_lifetime_s),
        )
        self.medium = Medium(self.sim)
        self.warmup_us = to_us(config.warmup_s)
        self.duration_us = to_us(config.duration_s)
        self.legit_nodes = config.legit_nodes()
        self.attacker_nodes = config.attacker_nodes()
        self.blocklist = set()
        self.thresholds = thresholds or self._configured_thresholds()
        if config.defense == DEFENSE_MLDA and self.thresholds is None:
            raise ValueError(
                "defense 'mlda' needs thresholds; calibrate first or set them in config"
            )
        self.monitor = dfs.MonitorState(escalation=config.mlda.escalation)
        self.detection_rows = []
        self.interval_records = []
        self.verdicts = []
        # server-side per-interval observation state
        self._tap_rts_cts = {}
        self._stamp_c2 = set()
        self._stamp_c3 = set()
        self._interval_idx = 0
        self._build()

    def _configured_thresholds(self):
        m = self.config.mlda
        if m.rc_th is None or m.se_th_s is None or m.re_th is None:
            return None
        return dfs.Thresholds(m.rc_th, m.se_th_s, m.re_th, m.interval_s)

    # -- construction -------------------------------------------------------

    def _build(self):
        cfg = self.config
        sim = self.sim
        self.stats = {}
        self.stations = {}
        self.sinks = {}
        self.tcp_sources = {}
        self.pulsed_sources = {}
        self.recorders = {}

        ap = Station(sim, self.medium, self.phy, cfg.ap_node, sim.rng.fork(cfg.ap_node))
        ap.blocklist = self.blocklist
        ap.on_data_rx = self._ap_data_rx
        ap.on_copy_done = self._copy_done
        self.stations[cfg.ap_node] = ap
        self.ap = ap

        for node in self.legit_nodes:
            st = Station(sim, self.medium, self.phy, node, sim.rng.fork(node))
            st.on_copy_done = self._copy_done
            st.on_enqueue = self._enqueued
            st.on_data_rx = self._station_data_rx
            self.stations[node] = st
            self.stats[node] = FlowStats(node, is_attack=False)
            self.sinks[node] = TcpSink(sim, ap, node)
            self.tcp_sources[node] = TcpSource(
                sim, st, cfg.ap_node, cfg.legit.packet_bits, cfg.legit.rwnd,
                app_rate_pps=cfg.legit.app_rate_pps,
            )

        n_attack = len(self.attacker_nodes)
        for i, node in enumerate(self.attacker_nodes):
            st = Station(
                sim,
                self.medium,
                self.phy,
                node,
                sim.rng.fork(node),
                aggressive=True,
                queue_cap=cfg.attack.queue_cap,
                cw_base=cfg.attack.cw,
            )
            st.on_copy_done = self._copy_done
            st.on_enqueue = self._enqueued
            self.stations[node] = st
            self.stats[node] = FlowStats(node, is_attack=True)
            phase = (i * cfg.attack.period_s / n_attack) if cfg.attack.stagger else 0.0
            self.pulsed_sources[node] = PulsedSource(
                sim,
                st,
                cfg.ap_node,
                cfg.attack.period_s,
                cfg.attack.burst_s,
                cfg.attack.rate_pps,
                cfg.attack.packet_bits,
                jitter_s=cfg.attack.jitter_s,
                phase_s=phase,
                rng=st.rng,
            )

        # arrival spectra are recorded for every flow regardless of defense
        bin_us = to_us(cfg.shrew.bin_s)
        for node in self.legit_nodes + self.attacker_nodes:
            self.recorders[node] = spectral.ArrivalRecorder(node, bin_us, cfg.shrew.window_bins)

        self.medium.on_clean_frame = self._monitor_tap

        for node in self.legit_nodes:
            self._tap_rts_cts[node] = 0

        interval_us = to_us(cfg.mlda.interval_s)
        self._interval_us = interval_us
        sim.schedule(interval_us, "interval_rollover", self._on_interval)

        if cfg.defense == DEFENSE_SHREW:
            window_us = bin_us * cfg.shrew.window_bins
            if window_us <= self.duration_us:
                sim.schedule(window_us, "spectral_verdict", self._on_spectral_verdict)

    def start(self):
        for node in self.legit_nodes:
            self.tcp_sources[node].start()
        for node in self.attacker_nodes:
            self.pulsed_sources[node].start()

    # -- callbacks ----------------------------------------------------------

    def _in_window(self, t_us):
        return t_us >= self.warmup_us

    def _enqueued(self, frame, now):
        fs = self.stats.get(frame.src)
        if fs is not None:
            fs.on_sent(frame.payload_bits, self._in_window(now))

    def _copy_done(self, frame, outcome, now):
        fs = self.stats.get(frame.src)
        if fs is None:  # the AP's own ACK frames are overhead, not a flow
            return
        if outcome == OUT_DELIVERED:
            fs.on_delivered(frame.payload_bits)
        else:
            fs.on_dropped(frame.payload_bits, outcome, self._in_window(now))

    def _ap_data_rx(self, frame, now):
        src = frame.src
        rec = self.recorders.get(src)
        if rec is not None:
            rec.record(now)
        fs = self.stats.get(src)
        if fs is None:
            return
        if fs.is_attack:
            fs.on_goodput(frame.payload_bits, self._in_window(now))
        else:
            sink = self.sinks.get(src)
            if sink is not None and sink.on_data(frame, now):
                fs.on_goodput(frame.payload_bits, self._in_window(now))

    def _station_data_rx(self, frame, now):
        # transport ACK from the AP back to a legit sender
        src = self.tcp_sources.get(frame.dst)
        if src is not None and frame.src == self.config.ap_node:
            src.on_transport_ack(frame.seq_no, now)

    def _monitor_tap(self, frame, now):
        kind = frame.kind
        if kind == RTS:
            if frame.src in self._tap_rts_cts:
                self._tap_rts_cts[frame.src] += 1
            elif frame.src != self.config.ap_node:
                self._tap_rts_cts[frame.src] = 1
        elif kind == CTS:
            if frame.dst in self._tap_rts_cts:
                self._tap_rts_cts[frame.dst] += 1
            elif frame.dst != self.config.ap_node:
                self._tap_rts_cts[frame.dst] = 1
        if kind == RTS or kind == DATA:
            cb = frame.cb
            if cb[1] == "1":
                self._stamp_c2.add(frame.src)
            if cb[2] == "1":
                self._stamp_c3.add(frame.src)

    # -- monitoring interval -------------------------------------------------

    def _on_interval(self):
        now = self.sim.now_us
        self._interval_idx += 1
        cfg = self.config
        th = self.thresholds
        mlda_on = cfg.defense == DEFENSE_MLDA
        snapshots = {}
        for node in self.legit_nodes + self.attacker_nodes:
            snapshots[node] = self.stations[node].rollover_counters()
        self.ap.rollover_counters()  # AP is not monitored but stays in step

        if self.collect_intervals:
            for node, snap in sorted(snapshots.items()):
                self.interval_records.append(
                    IntervalRecord(
                        self._interval_idx,
                        node,
                        self._tap_rts_cts.get(node, 0),
                        snap.busy_stop_us,
                        snap.retrans,
                    )
                )

        if mlda_on:
            observations = {}
            for node in self.legit_nodes + self.attacker_nodes:
                if node in self.monitor.blocklist:
                    continue
                observations[node] = IntervalCounters(
                    rts_cts=self._tap_rts_cts.get(node, 0),
                    busy_stop_us=th.se_th_us + 1 if node in self._stamp_c2 else 0,
                    retrans=int(th.re_th) + 1 if node in self._stamp_c3 else 0,
                )
            actions = dfs.monitor_interval(self.monitor, observations, th)
            self._record_actions(actions)
            # next interval every honest node stamps its own previous bits
            for node, snap in snapshots.items():
                st = self.stations[node]
                if st.aggressive and cfg.mlda.lying_attacker:
                    st.stamp_cb = "000"
                else:
                    st.stamp_cb = str(dfs.compute_cb(snap, th))

        # server-side observation state resets every interval
        for node in self._tap_rts_cts:
            self._tap_rts_cts[node] = 0
        self._stamp_c2.clear()
        self._stamp_c3.clear()

        nxt = now + self._interval_us
        if nxt <= self.duration_us:
            self.sim.schedule(nxt, "interval_rollover", self._on_interval)

    def _record_actions(self, actions):
        transmitted = {}
        blocked = set()
        for act in actions:
            if isinstance(act, dfs.TransmitCB):
                transmitted[act.node] = act.cb
            else:
                blocked.add(act.node)
                self.blocklist.add(act.node)
                self.stations[act.node].disable()
                self.sim.trace_line("block", "node=%d" % act.node)
        for node in sorted(set(transmitted) | blocked):
            cb = transmitted.get(node)
            status = self.monitor.statuses[node].status
            self.detection_rows.append(
                (
                    self._interval_idx,
                    node,
                    str(cb) if cb is not None else "000",
                    status,
                    "block" if node in blocked else "transmit_cb",
                )
            )

    def _on_spectral_verdict(self):
        cfg = self.config
        for node in self.legit_nodes + self.attacker_nodes:
            rec = self.recorders[node]
            v = rec.analyze(cfg.shrew.cutoff_hz, cfg.shrew.ratio_threshold)
            self.verdicts.append(v)
            if v.verdict == spectral.ATTACK:
                self.blocklist.add(node)
                self.stations[node].disable()
                self.sim.trace_line("block", "node=%d ratio=%.4f" % (node, v.ratio))

    # -- execution ----------------------------------------------------------

    def execute(self):
        self.start()
        self.sim.run_until(self.duration_us)
        return self._collect()

    def analyze_spectra(self):
        """Spectra of the recorded first window (any defense, no blocking)."""
        cfg = self.config
        out = []
        for node in self.legit_nodes + self.attacker_nodes:
            out.append(self.recorders[node].analyze(cfg.shrew.cutoff_hz, cfg.shrew.ratio_threshold))
        return out

    def _collect(self):
        legit = ClassStats()
        attack = ClassStats()
        timeouts = 0
        for node, fs in sorted(self.stats.items()):
            (attack if fs.is_attack else legit).add(fs)
        for node, src in self.tcp_sources.items():
            self.stats[node].timeouts = src.timeouts
            timeouts += src.timeouts

        leftover = {}
        for node, st in self.stations.items():
            pkts = 0
            bits = 0
            for frame in st.queue:
                if frame.src in self.stats:
                    pkts += 1
                    bits += frame.payload_bits
            if node in self.stats:
                leftover[node] = (pkts, bits)
        audit_conservation(self.stats, leftover)

        false_blocks = len(self.blocklist & set(self.legit_nodes))
        return RunResult(
            config=self.config,
            window_s=self.config.duration_s - self.config.warmup_s,
            flows=self.stats,
            legit=legit,
            attack=attack,
            blocked=set(self.blocklist),
            false_blocks=false_blocks,
            detection_rows=self.detection_rows,
            verdicts=self.verdicts,
            thresholds=self.thresholds,
            interval_records=self.interval_records,
            timeouts=timeouts,
        )


def run_simulation(config, thresholds=None, trace=None, collect_intervals=False):
    return SimulationRun(
        config, thresholds=thresholds, trace=trace, collect_intervals=collect_intervals
    ).execute()
