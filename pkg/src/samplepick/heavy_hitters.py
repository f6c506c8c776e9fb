"""Space-Saving top-k counters and the sliding-window (cyclic array) variant."""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Iterable


@dataclass(slots=True)
class Counter:
    count: float
    overestimate: float
    stamp: int


class SpaceSaving:
    """Space-Saving with ``capacity`` counters.

    For every tracked key, true <= count <= true + total / capacity.
    Among equal minimum counts the least recently updated entry is evicted.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: dict[Hashable, Counter] = {}
        self.total = 0.0
        self._heap: list = []
        self._clock = itertools.count()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def count(self, key) -> float:
        e = self.entries.get(key)
        return e.count if e is not None else 0.0

    def min_entry(self):
        """The minimum counter, least recently updated first among ties.

        The heap holds one entry per key and is refreshed lazily: counts
        only grow, so a stale entry is a lower bound and gets re-pushed
        when it surfaces.
        """
        heap = self._heap
        while heap:
            count, stamp, key = heap[0]
            e = self.entries[key]
            if e.stamp == stamp:
                return key, e
            heapq.heapreplace(heap, (e.count, e.stamp, key))
        return None

    def insert(self, key, weight: float = 1) -> Hashable | None:
        """Add ``weight`` to ``key``; returns the evicted key, if any."""
        if weight <= 0:
            raise ValueError("weight must be positive")
        self.total += weight
        e = self.entries.get(key)
        if e is not None:
            e.count += weight
            e.stamp = next(self._clock)
            return None
        evicted = None
        if len(self.entries) < self.capacity:
            e = self.entries[key] = Counter(weight, 0.0, next(self._clock))
            heapq.heappush(self._heap, (e.count, e.stamp, key))
        else:
            evicted, victim = self.min_entry()
            del self.entries[evicted]
            e = self.entries[key] = Counter(victim.count + weight, victim.count, next(self._clock))
            heapq.heapreplace(self._heap, (e.count, e.stamp, key))
        return evicted

    def insert_many(self, keys: Iterable[Hashable]) -> None:
        """Unit-weight inserts in order; same result as calling insert() per key."""
        entries = self.entries
        get = entries.get
        heap = self._heap
        replace, push = heapq.heapreplace, heapq.heappush
        cap = self.capacity
        base = next(self._clock)
        stamp = base - 1
        for key in keys:
            stamp += 1
            e = get(key)
            if e is not None:
                e.count += 1
                e.stamp = stamp
            elif len(entries) < cap:
                entries[key] = Counter(1, 0.0, stamp)
                push(heap, (1, stamp, key))
            else:
                while True:
                    _, old, victim = heap[0]
                    e = entries[victim]
                    if e.stamp == old:
                        break
                    replace(heap, (e.count, e.stamp, victim))
                # the victim's counter object is recycled for the newcomer
                del entries[victim]
                c = e.count
                e.overestimate = c
                e.count = c = c + 1
                e.stamp = stamp
                entries[key] = e
                replace(heap, (c, stamp, key))
        self.total += stamp + 1 - base
        self._clock = itertools.count(stamp + 1)

    def query(self, theta: float) -> list[tuple[Hashable, float]]:
        """Keys with count >= theta * total, largest first (ties by key)."""
        if not 0 < theta <= 1:
            raise ValueError("theta must be in (0, 1]")
        bar = theta * self.total
        hits = [(k, e.count) for k, e in self.entries.items() if e.count >= bar]
        return sorted(hits, key=lambda kc: (-kc[1], kc[0]))

    def snapshot(self) -> dict:
        return {k: (e.count, e.overestimate) for k, e in self.entries.items()}


def ss_insert(hh: SpaceSaving, key, weight: float = 1):
    return hh.insert(key, weight)


def ss_query(hh: SpaceSaving, theta: float):
    return hh.query(theta)


@dataclass(slots=True)
class IntervalEntry:
    slots: list[float]
    accum: float
    stamp: int


class IntervalHH:
    """Space-Saving over a sliding window of ``r`` sub-intervals.

    Each tracked key keeps a ring of per-sub-interval counts plus their sum
    (``accum``); the sum is the eviction key. A newcomer that evicts the
    minimum inherits its ``accum`` in the active slot.
    """

    def __init__(self, capacity: int, r: int, window_s: float = 60.0, start_s: float = 0.0):
        if capacity < 1 or r < 1:
            raise ValueError("capacity and r must be >= 1")
        self.capacity = capacity
        self.r = r
        self.window_s = window_s
        self.sub_len = window_s / r
        self.active = 0
        self.boundary = start_s + self.sub_len
        self.entries: dict[Hashable, IntervalEntry] = {}
        self.totals = [0.0] * r
        self.total = 0.0
        self._heap: list = []
        self._clock = itertools.count()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def count(self, key) -> float:
        e = self.entries.get(key)
        return e.accum if e is not None else 0.0

    def _rebuild_heap(self):
        self._heap = [(e.accum, e.stamp, k) for k, e in self.entries.items()]
        heapq.heapify(self._heap)

    def min_entry(self):
        # same lazy refresh as SpaceSaving; advance() rebuilds the heap when counts drop
        heap = self._heap
        while heap:
            accum, stamp, key = heap[0]
            e = self.entries[key]
            if e.stamp == stamp:
                return key, e
            heapq.heapreplace(heap, (e.accum, e.stamp, key))
        return None

    def insert(self, key, weight: float = 1, now: float | None = None):
        if weight <= 0:
            raise ValueError("weight must be positive")
        if now is not None and now >= self.boundary:
            raise ValueError("advance() must be called for the elapsed sub-interval first")
        a = self.active
        self.totals[a] += weight
        self.total += weight
        e = self.entries.get(key)
        if e is not None:
            e.slots[a] += weight
            e.accum += weight
            e.stamp = next(self._clock)
            return None
        evicted = None
        slots = [0.0] * self.r
        if len(self.entries) < self.capacity:
            slots[a] = weight
            e = self.entries[key] = IntervalEntry(slots, weight, next(self._clock))
            heapq.heappush(self._heap, (e.accum, e.stamp, key))
        else:
            evicted, victim = self.min_entry()
            del self.entries[evicted]
            slots[a] = victim.accum + weight
            e = self.entries[key] = IntervalEntry(slots, victim.accum + weight, next(self._clock))
            heapq.heapreplace(self._heap, (e.accum, e.stamp, key))
        return evicted

    def advance(self) -> None:
        """Start the next sub-interval: drop the slot being reused."""
        a = self.active = (self.active + 1) % self.r
        for e in self.entries.values():
            e.accum -= e.slots[a]
            e.slots[a] = 0.0
        self.total -= self.totals[a]
        self.totals[a] = 0.0
        self.boundary += self.sub_len
        self._rebuild_heap()

    def tick(self, now: float) -> int:
        """Advance across every boundary at or before ``now``."""
        n = 0
        while now >= self.boundary:
            self.advance()
            n += 1
        return n

    def _window(self, r_prime: int) -> list[int]:
        if not 1 <= r_prime <= self.r:
            raise ValueError("window must cover 1..r sub-intervals")
        return [(self.active - i) % self.r for i in range(r_prime)]

    def window_counts(self, r_prime: int) -> dict[Hashable, float]:
        idx = self._window(r_prime)
        return {k: sum(e.slots[i] for i in idx) for k, e in self.entries.items()}

    def window_total(self, r_prime: int) -> float:
        return sum(self.totals[i] for i in self._window(r_prime))

    def query_interval(self, r_prime: int, theta: float) -> list[tuple[Hashable, float]]:
        """Keys whose count over the last ``r_prime`` sub-intervals is at
        least ``theta`` of the traffic in those sub-intervals."""
        bar = theta * self.window_total(r_prime)
        hits = [(k, c) for k, c in self.window_counts(r_prime).items() if c > 0 and c >= bar]
        return sorted(hits, key=lambda kc: (-kc[1], kc[0]))

    def slots_for(self, now: float, length_s: float) -> int:
        """Number of recent slots whose span best matches ``[now - length_s, now]``.

        The active slot is partial (it started at ``boundary - sub_len``),
        so the oldest slot is included when that overshoots the window by
        less than it would undershoot without it.
        """
        if not self.boundary - self.sub_len <= now <= self.boundary:
            raise ValueError("now lies outside the active sub-interval")
        elapsed = now - (self.boundary - self.sub_len)
        n = 1 + math.floor((length_s - elapsed) / self.sub_len + 0.5)
        return min(max(n, 1), self.r)

    def recent_counts(self, now: float, length_s: float) -> dict[Hashable, float]:
        return self.window_counts(self.slots_for(now, length_s))

    def query_recent(self, now: float, length_s: float, theta: float) -> list[tuple[Hashable, float]]:
        """Heavy keys over a window ending at ``now`` that need not start on a
        sub-interval boundary."""
        return self.query_interval(self.slots_for(now, length_s), theta)

    def query_bulky(self, threshold: float, r_prime: int) -> list[Hashable]:
        """Keys with at least ``threshold`` (absolute) in the last ``r_prime`` sub-intervals."""
        if threshold < 1:
            raise ValueError("bulky threshold must be >= 1")
        hits = [(k, c) for k, c in self.window_counts(r_prime).items() if c >= threshold]
        return [k for k, _ in sorted(hits, key=lambda kc: (-kc[1], kc[0]))]
