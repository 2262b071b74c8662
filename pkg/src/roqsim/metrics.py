"""Per-flow accounting and the run-level metrics derived from it.

Two ledgers per flow: the full-run ledger backs the conservation audit
(sent == delivered + dropped + still-queued, in packet copies and bits) and
the windowed ledger (events at or after the warm-up cutoff) backs metrics.
Goodput counts each sequence number once, at its first clean reception.
"""

from dataclasses import dataclass, field


class FlowStats:
    """Copy-level sender ledger plus receiver-side unique goodput."""

    __slots__ = (
        "node",
        "is_attack",
        "sent_pkts",
        "sent_bits",
        "delivered_pkts",
        "delivered_bits",
        "dropped_pkts",
        "dropped_bits",
        "drop_causes",
        "goodput_pkts",
        "goodput_bits",
        "w_sent_pkts",
        "w_sent_bits",
        "w_dropped_pkts",
        "w_dropped_bits",
        "w_goodput_pkts",
        "w_goodput_bits",
        "timeouts",
    )

    def __init__(self, node, is_attack):
        self.node = node
        self.is_attack = is_attack
        self.sent_pkts = 0
        self.sent_bits = 0
        self.delivered_pkts = 0
        self.delivered_bits = 0
        self.dropped_pkts = 0
        self.dropped_bits = 0
        self.drop_causes = {}
        self.goodput_pkts = 0
        self.goodput_bits = 0
        self.w_sent_pkts = 0
        self.w_sent_bits = 0
        self.w_dropped_pkts = 0
        self.w_dropped_bits = 0
        self.w_goodput_pkts = 0
        self.w_goodput_bits = 0
        self.timeouts = 0

    def on_sent(self, bits, in_window):
        self.sent_pkts += 1
        self.sent_bits += bits
        if in_window:
            self.w_sent_pkts += 1
            self.w_sent_bits += bits

    def on_delivered(self, bits):
        self.delivered_pkts += 1
        self.delivered_bits += bits

    def on_dropped(self, bits, cause, in_window):
        self.dropped_pkts += 1
        self.dropped_bits += bits
        self.drop_causes[cause] = self.drop_causes.get(cause, 0) + 1
        if in_window:
            self.w_dropped_pkts += 1
            self.w_dropped_bits += bits

    def on_goodput(self, bits, in_window):
        self.goodput_pkts += 1
        self.goodput_bits += bits
        if in_window:
            self.w_goodput_pkts += 1
            self.w_goodput_bits += bits

    @property
    def in_flight_pkts(self):
        return self.sent_pkts - self.delivered_pkts - self.dropped_pkts

    @property
    def in_flight_bits(self):
        return self.sent_bits - self.delivered_bits - self.dropped_bits


@dataclass
class ClassStats:
    """Aggregate over the flows of one traffic class (legit or attack)."""

    goodput_bits: int = 0
    goodput_pkts: int = 0
    sent_pkts: int = 0
    dropped_pkts: int = 0
    dropped_bits: int = 0

    def add(self, fs):
        self.goodput_bits += fs.w_goodput_bits
        self.goodput_pkts += fs.w_goodput_pkts
        self.sent_pkts += fs.w_sent_pkts
        self.dropped_pkts += fs.w_dropped_pkts
        self.dropped_bits += fs.w_dropped_bits


def received_bandwidth(stats, duration_s):
    """Delivered application bits per second over the metrics window."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    return stats.goodput_bits / duration_s


def packet_loss(stats):
    """(dropped packet copies, dropped/sent ratio); ratio is 0 when idle."""
    if stats.sent_pkts == 0:
        return stats.dropped_pkts, 0.0
    return stats.dropped_pkts, stats.dropped_pkts / stats.sent_pkts


def audit_conservation(flows, leftover_by_node):
    """Check sent == delivered + dropped + still-held for every flow.

    leftover_by_node maps node id -> (pkts, bits) still sitting in MAC queues
    (including any copy mid-exchange) at the end of the run.  Raises
    AssertionError on any imbalance; returns True otherwise.
    """
    for node, fs in sorted(flows.items()):
        left_pkts, left_bits = leftover_by_node.get(node, (0, 0))
        if fs.in_flight_pkts != left_pkts or fs.in_flight_bits != left_bits:
            raise AssertionError(
                "conservation violated for node %d: ledger in-flight %d pkts/%d bits, "
                "queues hold %d pkts/%d bits"
                % (node, fs.in_flight_pkts, fs.in_flight_bits, left_pkts, left_bits)
            )
        if fs.in_flight_pkts < 0 or fs.in_flight_bits < 0:
            raise AssertionError("negative in-flight for node %d" % node)
    return True
