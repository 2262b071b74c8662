"""Congestion-bit computation and the passive-server blocking state machine.

Per monitoring interval every station is summarized by three counters
(RTS/CTS activity, time its backoff sat frozen, retransmissions).  Each
counter strictly above its threshold sets one congestion bit.  The number of
set bits grades the finding (normal / suspected / attacker) and repeated bad
findings escalate to a block.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

NOFINDING = "nofinding"
NORMAL = "normal"
SUSPECTED = "suspected"
ATTACKER = "attacker"
BLOCKED = "blocked"

STREAK = "streak"
ABSOLUTE = "absolute"

# streak mode: consecutive findings needed before a block
ATTACKER_STREAK_LIMIT = 3
SUSPECTED_STREAK_LIMIT = 4


class CongestionBits(NamedTuple):
    """Ordered bit triple: high send rate, frozen backoff, retransmissions."""

    c1: bool
    c2: bool
    c3: bool

    def __str__(self):
        return "%d%d%d" % (self.c1, self.c2, self.c3)

    @classmethod
    def from_string(cls, s):
        if len(s) != 3 or any(ch not in "01" for ch in s):
            raise ValueError("congestion bits must be three 0/1 chars, got %r" % (s,))
        return cls(s[0] == "1", s[1] == "1", s[2] == "1")

    def count(self):
        return int(self.c1) + int(self.c2) + int(self.c3)


@dataclass(frozen=True)
class Thresholds:
    """Per-interval counter thresholds; a bit is set only on strict excess."""

    rc_th: float  # RTS/CTS frames per interval
    se_th_s: float  # seconds of frozen backoff per interval
    re_th: float  # retransmissions per interval
    interval_s: float = 1.0

    def __post_init__(self):
        for name in ("rc_th", "se_th_s", "re_th", "interval_s"):
            v = getattr(self, name)
            if not (v >= 0):
                raise ValueError("threshold %s must be non-negative, got %r" % (name, v))
        if self.interval_s <= 0:
            raise ValueError("interval_s must be positive")

    @property
    def se_th_us(self):
        return int(round(self.se_th_s * 1_000_000))


def compute_cb(counters, th):
    """Threshold one interval's counters into congestion bits.

    Equality does not set a bit; only counter > threshold does.
    """
    return CongestionBits(
        counters.rts_cts > th.rc_th,
        counters.busy_stop_us > th.se_th_us,
        counters.retrans > th.re_th,
    )


def classify_cb(cb):
    """Grade a bit pattern by how many bits are set (0..3)."""
    return (NOFINDING, NORMAL, SUSPECTED, ATTACKER)[cb.count()]


class TransmitCB(NamedTuple):
    node: int
    cb: CongestionBits


class Block(NamedTuple):
    node: int


@dataclass
class NodeStatus:
    status: str = NORMAL
    attacker_streak: int = 0
    suspected_streak: int = 0


class MonitorState:
    """Mutable per-run monitoring state (statuses, streaks, blocklist)."""

    def __init__(self, escalation=STREAK):
        if escalation not in (STREAK, ABSOLUTE):
            raise ValueError("escalation must be %r or %r" % (STREAK, ABSOLUTE))
        self.escalation = escalation
        self.statuses = {}
        self.blocklist = set()
        self.interval_index = 0  # 1-based after the first processed interval


def is_blocked(state, node):
    return node in state.blocklist


def monitor_interval(state, observations, th):
    """Process one interval of per-node observations; returns emitted actions.

    observations maps node id -> counters object (rts_cts, busy_stop_us,
    retrans).  Blocked nodes are absorbing: their observations are ignored.
    Streak mode: an attacker finding increments the attacker streak, a
    suspected finding increments the suspected streak without resetting the
    attacker streak, and a normal or empty finding resets both.  Absolute
    mode: blocks can fire only while processing interval 3 (status attacker)
    or interval 4 (status suspected).

    Blocking starts a new assessment epoch: every surviving node's streaks
    reset, because findings accumulated while the blocked nodes were loading
    the channel say nothing about behaviour in the relieved network.
    """
    state.interval_index += 1
    actions = []
    for node in sorted(observations):
        if node in state.blocklist:
            continue
        cb = compute_cb(observations[node], th)
        finding = classify_cb(cb)
        st = state.statuses.get(node)
        if st is None:
            st = state.statuses[node] = NodeStatus()
        if finding != NOFINDING:
            st.status = finding
            actions.append(TransmitCB(node, cb))
        if state.escalation == STREAK:
            if finding == ATTACKER:
                st.attacker_streak += 1
            elif finding == SUSPECTED:
                st.suspected_streak += 1
            else:
                st.attacker_streak = 0
                st.suspected_streak = 0
            block = (
                st.attacker_streak >= ATTACKER_STREAK_LIMIT
                or st.suspected_streak >= SUSPECTED_STREAK_LIMIT
            )
        else:
            block = (state.interval_index == 3 and st.status == ATTACKER) or (
                state.interval_index == 4 and st.status == SUSPECTED
            )
        if block:
            st.status = BLOCKED
            state.blocklist.add(node)
            actions.append(Block(node))
    if state.escalation == STREAK and any(isinstance(a, Block) for a in actions):
        for node, st in state.statuses.items():
            if st.status != BLOCKED:
                st.attacker_streak = 0
                st.suspected_streak = 0
    return actions
