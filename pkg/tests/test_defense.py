"""Congestion-bit computation, classification, and escalation state machine."""

import itertools

import pytest

from roqsim.defense import (
    ABSOLUTE,
    ATTACKER,
    BLOCKED,
    NOFINDING,
    NORMAL,
    STREAK,
    SUSPECTED,
    Block,
    CongestionBits,
    MonitorState,
    Thresholds,
    TransmitCB,
    classify_cb,
    compute_cb,
    is_blocked,
    monitor_interval,
)
from roqsim.mac import IntervalCounters

TH = Thresholds(rc_th=10.0, se_th_s=0.5, re_th=3.0)

# observation that produces exactly the wanted bit pattern under TH
BIT_COUNTERS = {
    "0": dict(rts_cts=10, busy_stop_us=500_000, retrans=3),  # at threshold: clear
    "1": dict(rts_cts=11, busy_stop_us=500_001, retrans=4),  # just above: set
}


def counters_for(code):
    on = BIT_COUNTERS["1"]
    off = BIT_COUNTERS["0"]
    return IntervalCounters(
        rts_cts=(on if code[0] == "1" else off)["rts_cts"],
        busy_stop_us=(on if code[1] == "1" else off)["busy_stop_us"],
        retrans=(on if code[2] == "1" else off)["retrans"],
    )


ALL_CODES = ["%d%d%d" % bits for bits in itertools.product((0, 1), repeat=3)]


def test_bits_require_strict_excess():
    for code in ALL_CODES:
        assert str(compute_cb(counters_for(code), TH)) == code


def test_classification_partition():
    grades = {
        "000": NOFINDING,
        "100": NORMAL, "010": NORMAL, "001": NORMAL,
        "110": SUSPECTED, "101": SUSPECTED, "011": SUSPECTED,
        "111": ATTACKER,
    }
    for code, grade in grades.items():
        assert classify_cb(CongestionBits.from_string(code)) == grade


def test_congestion_bits_string_round_trip():
    for code in ALL_CODES:
        cb = CongestionBits.from_string(code)
        assert str(cb) == code
        assert cb.count() == code.count("1")
    with pytest.raises(ValueError):
        CongestionBits.from_string("12")
    with pytest.raises(ValueError):
        CongestionBits.from_string("abc")


def test_threshold_validation():
    with pytest.raises(ValueError):
        Thresholds(rc_th=-1, se_th_s=0.5, re_th=3)
    with pytest.raises(ValueError):
        Thresholds(rc_th=1, se_th_s=0.5, re_th=3, interval_s=0)
    assert Thresholds(1, 0.0512, 3).se_th_us == 51_200


def drive(state, codes_by_node):
    """Feed one interval; codes_by_node maps node -> bit string."""
    obs = {node: counters_for(code) for node, code in codes_by_node.items()}
    return monitor_interval(state, obs, TH)


def test_streak_blocks_on_three_attacker_intervals():
    state = MonitorState(escalation=STREAK)
    assert drive(state, {1: "111"}) == [TransmitCB(1, CongestionBits.from_string("111"))]
    drive(state, {1: "111"})
    actions = drive(state, {1: "111"})
    assert Block(1) in actions
    assert state.statuses[1].status == BLOCKED
    assert is_blocked(state, 1)


def test_streak_blocks_on_four_suspected_intervals():
    state = MonitorState(escalation=STREAK)
    for _ in range(3):
        actions = drive(state, {1: "110"})
        assert Block(1) not in actions
    actions = drive(state, {1: "011"})  # any two-bit code keeps the streak
    assert Block(1) in actions


def test_normal_interval_resets_streaks():
    state = MonitorState(escalation=STREAK)
    drive(state, {1: "111"})
    drive(state, {1: "111"})
    drive(state, {1: "100"})  # one-bit finding wipes both streaks
    for _ in range(2):
        actions = drive(state, {1: "111"})
        assert Block(1) not in actions
    assert Block(1) in drive(state, {1: "111"})


def test_suspected_preserves_attacker_streak():
    state = MonitorState(escalation=STREAK)
    drive(state, {1: "111"})
    drive(state, {1: "110"})  # suspected: attacker streak survives
    drive(state, {1: "111"})
    actions = drive(state, {1: "111"})
    assert Block(1) in actions  # third attacker finding, suspected in between


def test_blocked_node_is_absorbing():
    state = MonitorState(escalation=STREAK)
    for _ in range(3):
        drive(state, {1: "111"})
    assert is_blocked(state, 1)
    assert drive(state, {1: "111"}) == []  # observations ignored once blocked
    assert state.statuses[1].status == BLOCKED


def test_nofinding_emits_nothing():
    state = MonitorState(escalation=STREAK)
    assert drive(state, {1: "000"}) == []
    assert state.statuses[1].status == NORMAL  # initial status untouched


def test_block_resets_surviving_streaks():
    # enforcement changes the network, so old momentum must not carry over
    state = MonitorState(escalation=STREAK)
    drive(state, {1: "111", 2: "111"})
    drive(state, {1: "111", 2: "110"})
    actions = drive(state, {1: "111", 2: "111"})  # node 1 reaches three
    assert Block(1) in actions and Block(2) not in actions
    assert state.statuses[2].attacker_streak == 0
    assert state.statuses[2].suspected_streak == 0
    drive(state, {2: "111"})
    actions = drive(state, {2: "111"})
    assert Block(2) not in actions  # needs a fresh run of three
    assert Block(2) in drive(state, {2: "111"})


def test_absolute_mode_interval_three_and_four():
    state = MonitorState(escalation=ABSOLUTE)
    drive(state, {1: "000"})
    drive(state, {1: "000"})
    actions = drive(state, {1: "111"})  # attacker status at interval 3
    assert Block(1) in actions

    state = MonitorState(escalation=ABSOLUTE)
    for _ in range(3):
        drive(state, {1: "110"})
    actions = drive(state, {1: "110"})  # suspected status at interval 4
    assert Block(1) in actions

    state = MonitorState(escalation=ABSOLUTE)
    drive(state, {1: "000"})
    drive(state, {1: "000"})
    drive(state, {1: "000"})
    drive(state, {1: "000"})
    actions = drive(state, {1: "111"})  # interval 5: the gate has passed
    assert Block(1) not in actions


def test_monitor_state_rejects_unknown_mode():
    with pytest.raises(ValueError):
        MonitorState(escalation="aggressive")


# -- exhaustive cross-check against an independent replay ---------------------


def oracle_streak(findings):
    """Interval (1-based) at which a block fires, or None; independent replay."""
    a = s = 0
    for i, f in enumerate(findings, start=1):
        if f == ATTACKER:
            a += 1
        elif f == SUSPECTED:
            s += 1
        else:
            a = s = 0
        if a >= 3 or s >= 4:
            return i
    return None


def oracle_absolute(findings):
    status = NORMAL
    for i, f in enumerate(findings, start=1):
        if f != NOFINDING:
            status = f
        if (i == 3 and status == ATTACKER) or (i == 4 and status == SUSPECTED):
            return i
    return None


@pytest.mark.parametrize("mode", [STREAK, ABSOLUTE])
def test_escalation_matches_replay_for_all_short_sequences(mode):
    oracle = oracle_streak if mode == STREAK else oracle_absolute
    for length in range(1, 5):
        for seq in itertools.product(ALL_CODES, repeat=length):
            state = MonitorState(escalation=mode)
            expected = oracle([classify_cb(CongestionBits.from_string(c)) for c in seq])
            got = None
            for i, code in enumerate(seq, start=1):
                actions = drive(state, {1: code})
                if any(isinstance(a, Block) for a in actions):
                    assert got is None, "blocked twice for %s" % (seq,)
                    got = i
            assert got == expected, "sequence %s: block at %s, replay says %s" % (
                seq, got, expected)
