"""Single-cell CSMA/CA MAC with RTS/CTS exchanges over a shared medium.

Every station hears every transmission (one collision domain, no capture):
two frames that overlap in time corrupt each other and are delivered to
nobody.  Data transfer always runs the four-way handshake
RTS -> CTS -> DATA -> ACK with SIFS gaps; contention uses DIFS plus slotted
binary-exponential backoff that freezes while the channel is sensed busy.

Per station and per monitoring interval three counters accumulate: clean
RTS/CTS frames heard, microseconds of frozen backoff, and retransmissions.
"""

from collections import deque

RTS = "RTS"
CTS = "CTS"
DATA = "DATA"
ACK = "ACK"

CHANNEL_IDLE = "idle"
CHANNEL_BUSY = "busy"

IDLE = "idle"
CONTEND = "contend"
TXSEQ = "txseq"

OUT_DELIVERED = "delivered"
OUT_RETRY_DROP = "retry_drop"
OUT_LIFETIME_DROP = "lifetime_drop"
OUT_OVERFLOW_DROP = "overflow_drop"
OUT_BLOCKED_DROP = "blocked_drop"


class PhyParams:
    """Channel timing constants; defaults model a 2 Mb/s DSSS cell."""

    __slots__ = (
        "slot_us",
        "sifs_us",
        "difs_us",
        "rate_bps",
        "cw_min",
        "cw_max",
        "retry_limit",
        "rts_bits",
        "cts_bits",
        "ack_bits",
        "mac_header_bits",
        "queue_lifetime_us",
        "rts_us",
        "cts_us",
        "ack_us",
        "cts_timeout_us",
        "ack_timeout_us",
        "nav_reset_us",
    )

    def __init__(
        self,
        slot_us=20,
        sifs_us=10,
        difs_us=50,
        rate_bps=2_000_000,
        cw_min=31,
        cw_max=1023,
        retry_limit=7,
        rts_bits=160,
        cts_bits=112,
        ack_bits=112,
        mac_header_bits=224,
        queue_lifetime_us=500_000,
    ):
        if slot_us <= 0 or sifs_us <= 0 or difs_us <= 0 or rate_bps <= 0:
            raise ValueError("PHY timing constants must be positive")
        if cw_min < 1 or cw_max < cw_min:
            raise ValueError("need 1 <= cw_min <= cw_max")
        self.slot_us = slot_us
        self.sifs_us = sifs_us
        self.difs_us = difs_us
        self.rate_bps = rate_bps
        self.cw_min = cw_min
        self.cw_max = cw_max
        self.retry_limit = retry_limit
        self.rts_bits = rts_bits
        self.cts_bits = cts_bits
        self.ack_bits = ack_bits
        self.mac_header_bits = mac_header_bits
        self.queue_lifetime_us = queue_lifetime_us
        self.rts_us = self.airtime_us(rts_bits)
        self.cts_us = self.airtime_us(cts_bits)
        self.ack_us = self.airtime_us(ack_bits)
        # responder answers at SIFS; allow one slot of slack before giving up
        self.cts_timeout_us = sifs_us + self.cts_us + 2 * slot_us
        self.ack_timeout_us = sifs_us + self.ack_us + 2 * slot_us
        # hearing an RTS reserves the medium; release it if no CTS follows
        self.nav_reset_us = sifs_us + self.cts_us + 2 * slot_us

    def airtime_us(self, bits):
        return (bits * 1_000_000 + self.rate_bps - 1) // self.rate_bps

    def data_us(self, payload_bits):
        return self.airtime_us(self.mac_header_bits + payload_bits)

    def exchange_tail_us(self, payload_bits):
        """NAV an RTS must reserve: the rest of the four-way handshake."""
        return 3 * self.sifs_us + self.cts_us + self.data_us(payload_bits) + self.ack_us


class Frame:
    """One physical frame.  DATA frames double as the queued packet copies."""

    __slots__ = (
        "kind",
        "src",
        "dst",
        "payload_bits",
        "cb",
        "duration_us",
        "seq_no",
        "retransmitted",
        "enqueued_us",
    )

    def __init__(self, kind, src, dst, payload_bits=0, cb="000", duration_us=0, seq_no=0):
        self.kind = kind
        self.src = src
        self.dst = dst
        self.payload_bits = payload_bits
        self.cb = cb
        self.duration_us = duration_us
        self.seq_no = seq_no
        self.retransmitted = False
        self.enqueued_us = 0

    def __repr__(self):
        return "<%s %d->%d seq=%d cb=%s>" % (self.kind, self.src, self.dst, self.seq_no, self.cb)


class IntervalCounters:
    """Per-station counters accumulated within one monitoring interval."""

    __slots__ = ("rts_cts", "busy_stop_us", "retrans")

    def __init__(self, rts_cts=0, busy_stop_us=0, retrans=0):
        self.rts_cts = rts_cts
        self.busy_stop_us = busy_stop_us
        self.retrans = retrans

    def reset(self):
        self.rts_cts = 0
        self.busy_stop_us = 0
        self.retrans = 0

    def snapshot(self):
        return IntervalCounters(self.rts_cts, self.busy_stop_us, self.retrans)

    @property
    def busy_stop_s(self):
        return self.busy_stop_us / 1_000_000.0

    def __repr__(self):
        return "IntervalCounters(rts_cts=%d, busy_stop_us=%d, retrans=%d)" % (
            self.rts_cts,
            self.busy_stop_us,
            self.retrans,
        )


class Medium:
    """Shared single-cell channel tracking overlapping transmissions."""

    def __init__(self, sim):
        self.sim = sim
        self.stations = {}
        self._order = []  # node ids in registration order (deterministic)
        self._active = []
        self._listeners = set()  # node ids currently contending
        self.last_tx_start = -1
        self.on_clean_frame = None  # monitor tap: fn(frame, now_us)

    def register(self, station):
        if station.node_id in self.stations:
            raise ValueError("duplicate node id %d" % station.node_id)
        self.stations[station.node_id] = station
        self._order.append(station.node_id)

    def listen(self, node_id):
        self._listeners.add(node_id)

    def unlisten(self, node_id):
        self._listeners.discard(node_id)

    def busy(self):
        return bool(self._active)

    def sense(self, node_id, at_us=None):
        """Channel state as seen by one station (physical carrier or own NAV)."""
        st = self.stations.get(node_id)
        if st is None:
            raise ValueError("unknown node id %d" % node_id)
        now = self.sim.now_us if at_us is None else at_us
        if self._active or st.nav_until > now:
            return CHANNEL_BUSY
        return CHANNEL_IDLE

    def transmit(self, src_id, frame, air_us):
        now = self.sim.now_us
        rec = [frame, src_id, False]
        if self._active:
            for r in self._active:
                r[2] = True
            rec[2] = True
        was_idle = not self._active
        self._active.append(rec)
        self.last_tx_start = now
        self.sim.schedule(now + air_us, "frame_end", lambda r=rec: self._end(r))
        if was_idle and self._listeners:
            for nid in sorted(self._listeners):
                self.stations[nid].on_medium_busy(now)

    def _end(self, rec):
        self._active.remove(rec)
        frame, src_id, corrupted = rec
        now = self.sim.now_us
        if not corrupted:
            if self.on_clean_frame is not None:
                self.on_clean_frame(frame, now)
            self.sim.trace_line(
                "frame",
                "%s src=%d dst=%d cb=%s seq=%d"
                % (frame.kind, frame.src, frame.dst, frame.cb, frame.seq_no),
            )
            for nid in self._order:
                if nid != src_id:
                    self.stations[nid].receive(frame, now)
        if not self._active and self._listeners:
            for nid in sorted(self._listeners):
                self.stations[nid].on_medium_idle(now)


class Station:
    """One DCF station: FIFO frame queue, backoff state, exchange sequencing.

    aggressive=True keeps the contention window pinned at its base on failures
    (greedy senders that never yield); cw_base overrides that base so a greedy
    sender can contend with shorter backoffs than compliant stations.  A
    station with a blocklist attached acts as the access point: it refuses CTS
    to blocked sources and discards their DATA.  disable() models
    deassociation: the station stops transmitting entirely.
    """

    def __init__(self, sim, medium, phy, node_id, rng, aggressive=False, queue_cap=None,
                 cw_base=None):
        self.sim = sim
        self.medium = medium
        self.phy = phy
        self.node_id = node_id
        self.rng = rng
        self.aggressive = aggressive
        self.queue_cap = queue_cap
        self.queue = deque()
        self.state = IDLE
        self.cw_base = cw_base if cw_base is not None else phy.cw_min
        self.cw = self.cw_base
        self.disabled = False
        self.retry = 0
        self.backoff_rem = 0
        self.nav_until = 0
        self.counters = IntervalCounters()
        self.stamp_cb = "000"  # congestion bits stamped into outgoing RTS/DATA
        self.blocklist = None  # set of node ids (access point only)
        self.on_data_rx = None  # fn(frame, now_us): clean DATA addressed to me
        self.on_copy_done = None  # fn(frame, outcome, now_us): sender-side ledger
        self.on_enqueue = None  # fn(frame, now_us): fires for every copy offered
        self._counting = False
        self._count_start = 0
        self._frozen_since = None
        self._attempt_h = None
        self._start_h = None
        self._nav_h = None
        self._timeout_h = None
        self._resp_h = None
        self._awaiting = None
        medium.register(self)

    # -- queueing ---------------------------------------------------------

    def enqueue(self, frame):
        """Accept a DATA frame for transmission; returns False on overflow."""
        now = self.sim.now_us
        frame.enqueued_us = now
        if self.on_enqueue is not None:
            self.on_enqueue(frame, now)
        if self.disabled:
            if self.on_copy_done is not None:
                self.on_copy_done(frame, OUT_BLOCKED_DROP, now)
            return False
        if self.queue_cap is not None and len(self.queue) >= self.queue_cap:
            if self.on_copy_done is not None:
                self.on_copy_done(frame, OUT_OVERFLOW_DROP, now)
            return False
        self.queue.append(frame)
        if self.state == IDLE:
            self.retry = 0
            self.backoff_rem = self.rng.uniform_int(0, self.cw)
            self._enter_contend(now)
        return True

    def pending(self):
        return len(self.queue)

    def disable(self):
        """Deassociate: cease all transmission and drop everything queued.

        A frame already in the air completes (it cannot be recalled); its
        exchange dies because the timeout handle is cancelled here.
        """
        if self.disabled:
            return
        self.disabled = True
        now = self.sim.now_us
        self.checkpoint_freeze(now)
        self._leave_contend()
        for h in (self._timeout_h, self._resp_h):
            if h is not None:
                h.cancel()
        self._timeout_h = self._resp_h = None
        self._awaiting = None
        self._frozen_since = None
        self.state = IDLE
        while self.queue:
            copy = self.queue.popleft()
            if self.on_copy_done is not None:
                self.on_copy_done(copy, OUT_BLOCKED_DROP, now)

    # -- contention -------------------------------------------------------

    def _enter_contend(self, now):
        self.state = CONTEND
        self._frozen_since = None
        self.medium.listen(self.node_id)
        self._resume_contention(now)

    def _leave_contend(self):
        self.medium.unlisten(self.node_id)
        for h in (self._attempt_h, self._start_h, self._nav_h):
            if h is not None:
                h.cancel()
        self._attempt_h = self._start_h = self._nav_h = None
        self._counting = False

    def _resume_contention(self, now):
        if self.medium.busy():
            if self._frozen_since is None:
                self._frozen_since = now
            return
        if self.nav_until > now:
            if self._frozen_since is None:
                self._frozen_since = now
            if self._nav_h is None or self._nav_h.cancelled:
                self._nav_h = self.sim.schedule(self.nav_until, "nav_expire", self._on_nav_wake)
            return
        if self._frozen_since is not None:
            self.counters.busy_stop_us += now - self._frozen_since
            self._frozen_since = None
        if self._counting or self._start_h is not None:
            return
        self._start_h = self.sim.schedule(now + self.phy.difs_us, "difs_end", self._on_count_start)

    def _on_nav_wake(self):
        self._nav_h = None
        if self.state == CONTEND:
            self._resume_contention(self.sim.now_us)

    def _on_count_start(self):
        self._start_h = None
        now = self.sim.now_us
        self._counting = True
        self._count_start = now
        if self.backoff_rem == 0:
            self._on_attempt()
        else:
            self._attempt_h = self.sim.schedule(
                now + self.backoff_rem * self.phy.slot_us, "attempt", self._on_attempt
            )

    def on_medium_busy(self, now):
        # called only while registered as a contention listener
        if self.disabled:
            return
        if self._counting:
            elapsed = now - self._count_start
            self.backoff_rem -= min(self.backoff_rem, elapsed // self.phy.slot_us)
            self._counting = False
            if self._attempt_h is not None:
                # an attempt at this exact instant still fires (same-slot collision)
                if self._attempt_h.fire_us != now:
                    self._attempt_h.cancel()
                    self._attempt_h = None
        elif self._start_h is not None:
            self._start_h.cancel()
            self._start_h = None
        if self._frozen_since is None:
            self._frozen_since = now

    def on_medium_idle(self, now):
        if self.state == CONTEND and not self.disabled:
            self._resume_contention(now)

    def checkpoint_freeze(self, now):
        """Fold any in-progress freeze into the counters (interval boundary)."""
        if self._frozen_since is not None:
            self.counters.busy_stop_us += now - self._frozen_since
            self._frozen_since = now

    def rollover_counters(self):
        """Snapshot and reset this station's interval counters."""
        self.checkpoint_freeze(self.sim.now_us)
        snap = self.counters.snapshot()
        self.counters.reset()
        return snap

    # -- exchange sequencing ----------------------------------------------

    def _drop_stale_head(self, now):
        if self.aggressive:  # greedy senders never discard stale frames
            return
        lifetime = self.phy.queue_lifetime_us
        while self.queue and now - self.queue[0].enqueued_us > lifetime:
            copy = self.queue.popleft()
            self.cw = self.cw_base
            self.retry = 0
            if self.on_copy_done is not None:
                self.on_copy_done(copy, OUT_LIFETIME_DROP, now)

    def _on_attempt(self):
        if self.disabled:
            return
        self._attempt_h = None
        self._counting = False
        self._frozen_since = None
        now = self.sim.now_us
        self.backoff_rem = 0
        self._drop_stale_head(now)
        if not self.queue:
            self._leave_contend()
            self.state = IDLE
            return
        head = self.queue[0]
        self._leave_contend()
        self.state = TXSEQ
        rts = Frame(
            RTS,
            self.node_id,
            head.dst,
            0,
            cb=self.stamp_cb,
            duration_us=self.phy.exchange_tail_us(head.payload_bits),
            seq_no=head.seq_no,
        )
        self.medium.transmit(self.node_id, rts, self.phy.rts_us)
        self._awaiting = CTS
        self._timeout_h = self.sim.schedule(
            now + self.phy.rts_us + self.phy.cts_timeout_us, "cts_timeout", self._on_exchange_timeout
        )

    def _tx_data(self):
        now = self.sim.now_us
        head = self.queue[0]
        head.cb = self.stamp_cb
        head.duration_us = self.phy.sifs_us + self.phy.ack_us
        air = self.phy.data_us(head.payload_bits)
        self.medium.transmit(self.node_id, head, air)
        self._awaiting = ACK
        self._timeout_h = self.sim.schedule(
            now + air + self.phy.ack_timeout_us, "ack_timeout", self._on_exchange_timeout
        )

    def _tx_response(self, frame, air):
        self._resp_h = None
        self.medium.transmit(self.node_id, frame, air)

    def _on_exchange_timeout(self):
        """Missing CTS or ACK: count a retransmission, back off, retry or drop."""
        if self.disabled:
            return
        self._timeout_h = None
        self._awaiting = None
        now = self.sim.now_us
        self.counters.retrans += 1
        self.retry += 1
        if not self.aggressive:
            self.cw = min(2 * (self.cw + 1) - 1, self.phy.cw_max)
        if self.retry > self.phy.retry_limit:
            copy = self.queue.popleft()
            self.cw = self.cw_base
            self.retry = 0
            if self.on_copy_done is not None:
                self.on_copy_done(copy, OUT_RETRY_DROP, now)
            if not self.queue:
                self.state = IDLE
                return
        self.backoff_rem = self.rng.uniform_int(0, self.cw)
        self._enter_contend(now)

    def _exchange_success(self):
        now = self.sim.now_us
        copy = self.queue.popleft()
        self._awaiting = None
        self.cw = self.cw_base
        self.retry = 0
        if self.on_copy_done is not None:
            self.on_copy_done(copy, OUT_DELIVERED, now)
        if self.queue:
            self.backoff_rem = self.rng.uniform_int(0, self.cw)
            self._enter_contend(now)
        else:
            self.state = IDLE

    # -- reception ---------------------------------------------------------

    def receive(self, frame, now):
        if self.disabled:
            return
        kind = frame.kind
        if kind == RTS or kind == CTS:
            self.counters.rts_cts += 1
        if frame.dst != self.node_id:
            if frame.duration_us > 0:
                nav = now + frame.duration_us
                if nav > self.nav_until:
                    self.nav_until = nav
                if kind == RTS:
                    # release the reservation if the handshake dies (no CTS)
                    self.sim.schedule(
                        now + self.phy.nav_reset_us,
                        "nav_reset_check",
                        lambda t=now: self._nav_reset_check(t),
                    )
            return
        if kind == RTS:
            if self.blocklist is not None and frame.src in self.blocklist:
                return
            if self.nav_until > now:
                return
            if self._resp_h is not None:
                return
            cts = Frame(
                CTS,
                self.node_id,
                frame.src,
                0,
                duration_us=max(frame.duration_us - self.phy.sifs_us - self.phy.cts_us, 0),
                seq_no=frame.seq_no,
            )
            self._resp_h = self.sim.schedule(
                now + self.phy.sifs_us,
                "cts_tx",
                lambda f=cts: self._tx_response(f, self.phy.cts_us),
            )
        elif kind == CTS:
            if self._awaiting == CTS and self.queue and frame.src == self.queue[0].dst:
                if self._timeout_h is not None:
                    self._timeout_h.cancel()
                    self._timeout_h = None
                self._awaiting = None
                self.sim.schedule(now + self.phy.sifs_us, "data_tx", self._tx_data)
        elif kind == DATA:
            if self.blocklist is not None and frame.src in self.blocklist:
                return
            if self._resp_h is None:
                ack = Frame(ACK, self.node_id, frame.src, 0, seq_no=frame.seq_no)
                self._resp_h = self.sim.schedule(
                    now + self.phy.sifs_us,
                    "ack_tx",
                    lambda f=ack: self._tx_response(f, self.phy.ack_us),
                )
                if self.on_data_rx is not None:
                    self.on_data_rx(frame, now)
        elif kind == ACK:
            if self._awaiting == ACK:
                if self._timeout_h is not None:
                    self._timeout_h.cancel()
                    self._timeout_h = None
                self._exchange_success()

    def _nav_reset_check(self, rts_end_us):
        if self.medium.last_tx_start <= rts_end_us and not self.medium.busy():
            now = self.sim.now_us
            if self.nav_until > now:
                self.nav_until = now
                if self.state == CONTEND:
                    self._resume_contention(now)

    def sense_channel(self, at_us=None):
        """Busy if any transmission is in the air or my NAV has not expired."""
        return self.medium.sense(self.node_id, at_us)
