"""Traffic sources: window/timeout TCP-like flows and pulsed greedy senders.

The TCP model is deliberately minimal, one-way data with cumulative ACKs, no
fast retransmit and no delayed ACKs: a smoothed-RTT timer with a hard floor,
slow-start / congestion-avoidance window growth, and multiplicative timeout
backoff.  That floor is what slow on-off attackers synchronize against.
"""

from dataclasses import dataclass
from typing import Optional

from .kernel import to_us
from .mac import DATA, Frame

MIN_RTO_S = 1.0
MAX_RTO_S = 64.0
RTT_GAIN = 1.0 / 8.0  # smoothed RTT gain
VAR_GAIN = 1.0 / 4.0  # RTT variance gain

SLOW_START = "slow_start"
CONG_AVOID = "congestion_avoidance"
TIMEOUT_BACKOFF = "timeout_backoff"

TCP_ACK_BITS = 320


@dataclass
class TcpFlowState:
    """Sender-side congestion state, advanced by apply_ack / apply_timeout."""

    cwnd: int = 1
    ssthresh: int = 64
    srtt: Optional[float] = None
    rttvar: float = 0.0
    rto: float = MIN_RTO_S
    state: str = SLOW_START
    ack_credit: int = 0  # ACKs banked toward +1 cwnd in congestion avoidance


def apply_ack(flow, rtt_sample_s=None):
    """Advance the flow for one cumulative ACK, optionally with an RTT sample."""
    if rtt_sample_s is not None:
        if flow.srtt is None:
            flow.srtt = rtt_sample_s
            flow.rttvar = rtt_sample_s / 2.0
        else:
            err = rtt_sample_s - flow.srtt
            flow.rttvar = (1.0 - VAR_GAIN) * flow.rttvar + VAR_GAIN * abs(err)
            flow.srtt += RTT_GAIN * err
        flow.rto = max(MIN_RTO_S, flow.srtt + 4.0 * flow.rttvar)
    if flow.cwnd < flow.ssthresh:
        flow.cwnd += 1
        flow.state = SLOW_START if flow.cwnd < flow.ssthresh else CONG_AVOID
    else:
        flow.state = CONG_AVOID
        flow.ack_credit += 1
        if flow.ack_credit >= flow.cwnd:
            flow.ack_credit = 0
            flow.cwnd += 1
    return flow


def apply_timeout(flow):
    """Retransmission timeout: collapse the window and double the timer."""
    flow.ssthresh = max(flow.cwnd // 2, 2)
    flow.cwnd = 1
    flow.ack_credit = 0
    flow.rto = min(flow.rto * 2.0, MAX_RTO_S)
    flow.state = TIMEOUT_BACKOFF
    return flow


class TcpSource:
    """Window-limited sender feeding one station's MAC queue.

    app_rate_pps > 0 paces the application: packets become available at that
    rate and wait (unsent) until the window opens.  0 means a greedy bulk
    transfer with unlimited data ready.
    """

    def __init__(self, sim, station, dst, packet_bits, rwnd, app_rate_pps=0):
        self.sim = sim
        self.station = station
        self.dst = dst
        self.packet_bits = packet_bits
        self.rwnd = rwnd
        self.app_rate_pps = app_rate_pps
        self.app_available = 0  # produced by the application, not yet sent
        self.flow = TcpFlowState()
        self.next_seq = 1
        self.acked_hi = 0
        self.recover_hi = 0  # after a timeout, sequences <= this are resent on ACK clock
        self.send_times = {}  # seq -> (sent_us, retransmitted)
        self.timeouts = 0
        self._rto_h = None
        self._app_spacing_us = 1_000_000 // app_rate_pps if app_rate_pps > 0 else 0
        self._next_app_us = 0

    def start(self):
        if self.app_rate_pps > 0:
            self._next_app_us = self.sim.now_us + self._app_spacing_us
            self.sim.schedule(self._next_app_us, "app_arrival", self._on_app_arrival)
        self._fill_window()

    def window(self):
        return min(self.flow.cwnd, self.rwnd)

    def outstanding(self):
        return self.next_seq - 1 - self.acked_hi

    def _on_app_arrival(self):
        self.app_available += 1
        self._next_app_us += self._app_spacing_us
        self.sim.schedule(self._next_app_us, "app_arrival", self._on_app_arrival)
        self._fill_window()

    def _fill_window(self):
        now = self.sim.now_us
        while self.outstanding() < self.window():
            if self.app_rate_pps > 0:
                if self.app_available == 0:
                    break
                self.app_available -= 1
            seq = self.next_seq
            self.next_seq += 1
            self.send_times[seq] = (now, False)
            frame = Frame(DATA, self.station.node_id, self.dst, self.packet_bits, seq_no=seq)
            self.station.enqueue(frame)
        self._ensure_timer()

    def _ensure_timer(self):
        if self.outstanding() > 0:
            if self._rto_h is None:
                self._rto_h = self.sim.schedule_in(to_us(self.flow.rto), "tcp_rto", self._on_rto)
        elif self._rto_h is not None:
            self._rto_h.cancel()
            self._rto_h = None

    def on_transport_ack(self, ack_no, now):
        if ack_no <= self.acked_hi:
            return
        sample = None
        for seq in range(ack_no, self.acked_hi, -1):
            info = self.send_times.get(seq)
            if info is not None and not info[1]:
                sample = (now - info[0]) / 1_000_000.0
                break
        for seq in range(self.acked_hi + 1, ack_no + 1):
            self.send_times.pop(seq, None)
        self.acked_hi = ack_no
        apply_ack(self.flow, sample)
        if self._rto_h is not None:  # restart the timer for what remains
            self._rto_h.cancel()
            self._rto_h = None
        # go-back-N repair: each ACK clocks out the next segment lost before
        # the timeout, otherwise a multi-packet hole stalls until every RTO
        if self.acked_hi < self.recover_hi and self.outstanding() > 0:
            self._retransmit(self.acked_hi + 1)
        self._fill_window()

    def _retransmit(self, seq):
        self.send_times[seq] = (self.sim.now_us, True)
        frame = Frame(DATA, self.station.node_id, self.dst, self.packet_bits, seq_no=seq)
        frame.retransmitted = True
        self.station.enqueue(frame)

    def _on_rto(self):
        self._rto_h = None
        if self.outstanding() <= 0:
            return
        apply_timeout(self.flow)
        self.timeouts += 1
        self.recover_hi = self.next_seq - 1
        self._retransmit(self.acked_hi + 1)  # oldest unacked first
        self._rto_h = self.sim.schedule_in(to_us(self.flow.rto), "tcp_rto", self._on_rto)


class TcpSink:
    """Receiver side on the access point: cumulative ACKs, coalesced in queue.

    At most one ACK frame per flow sits in the AP queue; while it is queued
    its cumulative ack number is bumped in place instead of enqueuing more.
    """

    def __init__(self, sim, ap_station, src_node, ack_bits=TCP_ACK_BITS):
        self.sim = sim
        self.ap = ap_station
        self.src_node = src_node
        self.ack_bits = ack_bits
        self.rcv_hi = 0
        self.above = set()
        self._pending_ack = None

    def on_data(self, frame, now):
        """Returns True if this seq is new (first delivery), else False."""
        seq = frame.seq_no
        first = False
        if seq == self.rcv_hi + 1:
            self.rcv_hi = seq
            first = True
            while self.rcv_hi + 1 in self.above:
                self.rcv_hi += 1
                self.above.remove(self.rcv_hi)
        elif seq > self.rcv_hi and seq not in self.above:
            self.above.add(seq)
            first = True
        ack = self._pending_ack
        if ack is not None and ack in self.ap.queue:
            ack.seq_no = self.rcv_hi  # cumulative: bumping in place is safe
        else:
            ack = Frame(DATA, self.ap.node_id, self.src_node, self.ack_bits, seq_no=self.rcv_hi)
            self._pending_ack = ack
            self.ap.enqueue(ack)
        return first


def is_bursting(t_s, period_s, burst_s, phase_s=0.0):
    """True while a pulsed sender is inside a burst window; period 0 disables."""
    if period_s <= 0 or burst_s <= 0:
        return False
    return (t_s - phase_s) % period_s < burst_s


def offered_load_bps(period_s, burst_s, rate_pps, packet_bits):
    """Long-run average offered load of the on-off pattern."""
    if period_s <= 0:
        return 0.0
    return rate_pps * packet_bits * burst_s / period_s


class PulsedSource:
    """On-off sender: rate_pps packet arrivals during each burst window.

    Arrivals are evenly spaced inside the burst.  Optional jitter shifts each
    burst start by a per-period uniform draw from the node's own stream.
    """

    def __init__(self, sim, station, dst, period_s, burst_s, rate_pps, packet_bits,
                 jitter_s=0.0, phase_s=0.0, rng=None):
        self.sim = sim
        self.station = station
        self.dst = dst
        self.period_us = to_us(period_s)
        self.burst_us = to_us(burst_s)
        self.jitter_us = to_us(jitter_s)
        self.phase_us = to_us(phase_s)
        self.packet_bits = packet_bits
        self.rate_pps = rate_pps
        self.spacing_us = 1_000_000 // rate_pps if rate_pps > 0 else 0
        self.rng = rng
        self.next_seq = 1
        self.arrivals = 0
        self._k = 0  # period index
        self._i = 0  # arrival index within the burst
        self._offset = 0

    def enabled(self):
        return self.period_us > 0 and self.burst_us > 0 and self.rate_pps > 0

    def start(self):
        if not self.enabled():
            return
        self._begin_period(0)
        self._schedule_next()

    def _begin_period(self, k):
        self._k = k
        self._i = 0
        self._offset = 0
        if self.jitter_us > 0 and self.rng is not None:
            self._offset = self.rng.uniform_int(-self.jitter_us, self.jitter_us)

    def _next_time_us(self):
        while True:
            t = self.phase_us + self._k * self.period_us + self._offset + self._i * self.spacing_us
            if self._i * self.spacing_us < self.burst_us and t >= 0:
                return t
            self._begin_period(self._k + 1)

    def _schedule_next(self):
        t = self._next_time_us()
        while t < self.sim.now_us:  # jitter pushed it into the past: skip
            self._i += 1
            t = self._next_time_us()
        self.sim.schedule(t, "pulse_arrival", self._on_arrival)

    def _on_arrival(self):
        frame = Frame(DATA, self.station.node_id, self.dst, self.packet_bits, seq_no=self.next_seq)
        self.next_seq += 1
        self.arrivals += 1
        self.station.enqueue(frame)
        self._i += 1
        self._schedule_next()
