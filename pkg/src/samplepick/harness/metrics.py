"""Accuracy metrics and control-traffic accounting."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterable

from ..controller import HeavyFlow
from ..sampling import PATTERN_FLOWMOD_BYTES, R_FLOWMOD_BYTES
from ..switch import FLOWMOD_BYTES, PACKET_IN_BYTES, poll_reply_bytes
from .oracle import Truth


@dataclass(frozen=True)
class IntervalMetrics:
    interval: int
    heavy_true: int
    heavy_reported: int
    fn_rate: float
    fp_rate: float
    counter_error: float
    switch_rules_max: int
    switch_memory_bytes: int
    to_switch_bytes_per_s: float
    to_controller_bytes_per_s: float
    control_traffic_bytes_per_s: float
    packet_in_rate: float
    packets: int


COLUMNS = [f.name for f in fields(IntervalMetrics)]


@dataclass
class MetricsReport:
    header: dict
    intervals: list[IntervalMetrics] = field(default_factory=list)

    def summary(self) -> dict:
        """Means over intervals (maxima for rule and memory peaks)."""
        out: dict = {"interval": "mean"}
        n = len(self.intervals)
        for name in COLUMNS[1:]:
            values = [getattr(m, name) for m in self.intervals]
            if name in ("switch_rules_max", "switch_memory_bytes"):
                out[name] = max(values) if values else 0
            else:
                out[name] = sum(values) / n if n else 0.0
        return out

    def rows(self) -> list[dict]:
        return [{c: getattr(m, c) for c in COLUMNS} for m in self.intervals] + [self.summary()]

    def mean(self, name: str, skip: int = 0) -> float:
        values = [getattr(m, name) for m in self.intervals[skip:]]
        return sum(values) / len(values)


def score(reported: Iterable[HeavyFlow], truth: Truth) -> tuple[float, float, float, int]:
    """(fn_rate, fp_rate, counter_error, reported count).

    Both rates are relative to the number of truly heavy flows; the counter
    error is the mean relative error over truly heavy flows, counting a
    missed flow as 100%.
    """
    est = {h.key: h.estimate for h in reported}
    heavy = truth.heavy
    if not heavy:
        return 0.0, (1.0 if est else 0.0), 0.0, len(est)
    missed = sum(1 for k in heavy if k not in est)
    spurious = sum(1 for k in est if k not in heavy)
    errors = []
    for k in heavy:
        true = truth.counts[k]
        errors.append(abs(est[k] - true) / true if k in est else 1.0)
    return missed / len(heavy), spurious / len(heavy), sum(errors) / len(errors), len(est)


@dataclass(frozen=True)
class ControlEvent:
    kind: str          # flowmod | rotate_pattern | rotate_r | packet_in | poll_reply
    time: float
    rules: int = 0


EVENT_BYTES = {
    "flowmod": (FLOWMOD_BYTES, "to_switch"),
    "rotate_pattern": (PATTERN_FLOWMOD_BYTES, "to_switch"),
    "rotate_r": (R_FLOWMOD_BYTES, "to_switch"),
    "packet_in": (PACKET_IN_BYTES, "to_controller"),
}


def account_control_traffic(events: Iterable[ControlEvent], duration: float) -> dict[str, float]:
    """Bytes per second in each direction over ``duration`` seconds."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    sums = {"to_switch": 0, "to_controller": 0}
    for ev in events:
        if ev.kind == "poll_reply":
            sums["to_controller"] += poll_reply_bytes(ev.rules)
        else:
            size, direction = EVENT_BYTES[ev.kind]
            sums[direction] += size
    return {d: b / duration for d, b in sums.items()}
