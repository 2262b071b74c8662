"""Deterministic discrete-event core: virtual clock, event queue, seeded RNG.

Time is kept as non-negative integer microseconds so that slot arithmetic is
exact and runs replay bit-for-bit.  Events with equal fire times dispatch in
insertion order (monotone sequence number breaks ties).
"""

import heapq
import random

US_PER_S = 1_000_000

_MASK64 = 0xFFFFFFFFFFFFFFFF


def to_us(seconds):
    """Convert seconds to integer microseconds, rounding to nearest."""
    return int(round(seconds * US_PER_S))


def fmt_time(us):
    """Render integer microseconds as fixed-point seconds (trace format)."""
    return "%d.%06d" % (us // US_PER_S, us % US_PER_S)


def _mix64(x):
    # splitmix64 finalizer; stable across platforms and Python versions
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RandomSource:
    """Seeded pseudo-random stream that can fork independent substreams.

    fork(stream_id) derives the child seed from (seed, stream_id) only, so a
    node's draws never depend on how many other nodes exist or draw.
    """

    def __init__(self, seed):
        self.seed = seed & _MASK64
        self._rng = random.Random(_mix64(self.seed))

    def fork(self, stream_id):
        child = _mix64(self.seed ^ _mix64((stream_id + 1) & _MASK64))
        return RandomSource(child)

    def uniform_int(self, lo, hi):
        """Integer uniform on the closed range [lo, hi]."""
        if lo > hi:
            raise ValueError("uniform_int: empty range [%d, %d]" % (lo, hi))
        return self._rng.randint(lo, hi)

    def uniform(self, lo, hi):
        return self._rng.uniform(lo, hi)


class EventHandle:
    """Scheduled callback; cancel() guarantees it will never fire."""

    __slots__ = ("fire_us", "seq", "kind", "fn", "detail", "cancelled")

    def __init__(self, fire_us, seq, kind, fn, detail):
        self.fire_us = fire_us
        self.seq = seq
        self.kind = kind
        self.fn = fn
        self.detail = detail
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Simulator:
    """Single-threaded event loop over integer-microsecond virtual time."""

    def __init__(self, seed=0, trace=None):
        self.now_us = 0
        self.rng = RandomSource(seed)
        self._heap = []
        self._next_seq = 0
        self._cur_seq = -1
        self._trace = trace  # file-like object or None
        self.dispatched = 0

    def schedule(self, fire_us, kind, fn, detail=""):
        """Schedule fn at absolute time fire_us; returns a cancellable handle.

        Scheduling into the past is a programming error and raises ValueError.
        """
        if fire_us < self.now_us:
            raise ValueError(
                "schedule into the past: t=%s < now=%s (%s)"
                % (fmt_time(fire_us), fmt_time(self.now_us), kind)
            )
        h = EventHandle(fire_us, self._next_seq, kind, fn, detail)
        self._next_seq += 1
        heapq.heappush(self._heap, (fire_us, h.seq, h))
        return h

    def schedule_in(self, delay_us, kind, fn, detail=""):
        return self.schedule(self.now_us + delay_us, kind, fn, detail)

    def run_until(self, end_us):
        """Dispatch all events with fire time <= end_us; returns the count."""
        if end_us < self.now_us:
            raise ValueError("run_until into the past")
        heap = self._heap
        trace = self._trace
        count = 0
        while heap and heap[0][0] <= end_us:
            fire_us, seq, h = heapq.heappop(heap)
            if h.cancelled:
                continue
            self.now_us = fire_us
            self._cur_seq = seq
            if trace is not None:
                trace.write("%s\t%d\t%s\t%s\n" % (fmt_time(fire_us), seq, h.kind, h.detail))
            h.fn()
            count += 1
        self.now_us = end_us
        self.dispatched += count
        return count

    def trace_line(self, kind, detail):
        """Emit an extra trace line attributed to the current dispatch."""
        if self._trace is not None:
            self._trace.write(
                "%s\t%d\t%s\t%s\n" % (fmt_time(self.now_us), self._cur_seq, kind, detail)
            )
