"""Two-stage match-and-action switch: exact count rules above a catch-all
sampling rule, with control-traffic accounting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .model import FlowKey, Packet
from .sampling import PATTERN_FLOWMOD_BYTES, Sampler

FLOWMOD_BYTES = PATTERN_FLOWMOD_BYTES
PACKET_IN_BYTES = 68
POLL_REPLY_HEADER_BYTES = 8
POLL_REPLY_ENTRY_BYTES = 40
RULE_BYTES = 20
DEFAULT_IDLE_TIMEOUT_US = 5_000_000


class DuplicateRule(ValueError):
    pass


class CapExceeded(RuntimeError):
    pass


class Outcome(enum.Enum):
    COUNTED = "counted"
    SAMPLED = "sampled"
    PASSED = "passed"


@dataclass
class FlowRule:
    id: int
    priority: int
    match: FlowKey | None
    action: str
    packets: int = 0
    bytes: int = 0
    last_hit_us: int = 0


@dataclass
class SwitchStats:
    packet_in_count: int = 0
    packet_in_bytes: int = 0
    flowmod_count: int = 0
    flowmod_bytes: int = 0
    poll_count: int = 0
    poll_reply_bytes: int = 0
    rotation_count: int = 0
    rotation_bytes: int = 0

    @property
    def to_controller_bytes(self) -> int:
        return self.packet_in_bytes + self.poll_reply_bytes

    @property
    def to_switch_bytes(self) -> int:
        return self.flowmod_bytes + self.rotation_bytes


def count_rule_cap(t: float) -> int:
    return math.ceil(1 / t - 1e-9)


class SwitchState:
    """A single switch's flow table.

    ``cap`` bounds the number of count rules (None for unbounded).
    With ``honor_marks`` off, marks are neither read nor written, which
    models switches without the mark-once extension.
    """

    SAMPLE_PRIORITY = 0
    COUNT_PRIORITY = 100

    def __init__(self, sampler: Sampler, *, id: str = "s0", cap: int | None = None,
                 honor_marks: bool = True, record_samples: bool = False):
        self.id = id
        self.sampler = sampler
        self.cap = cap
        self.honor_marks = honor_marks
        self.stats = SwitchStats()
        self.sample_rule = FlowRule(0, self.SAMPLE_PRIORITY, None, "sample")
        self.rules: dict[FlowKey, FlowRule] = {}
        self.peak_rules = 0
        self.sampled_seqs: list[int] | None = [] if record_samples else None
        self._next_id = 1

    @property
    def table(self) -> list[FlowRule]:
        """Rules in match order (priority, then install order)."""
        ordered = sorted(self.rules.values(), key=lambda r: (-r.priority, r.id))
        return ordered + [self.sample_rule]

    def process_packet(self, pkt: Packet) -> Outcome:
        marks = self.honor_marks
        if marks and pkt.mark:
            return Outcome.PASSED
        rule = self.rules.get(pkt.key)
        if rule is not None:
            rule.packets += 1
            rule.bytes += pkt.size
            rule.last_hit_us = pkt.time_us
            if marks:
                pkt.mark = True
            return Outcome.COUNTED
        sr = self.sample_rule
        sr.packets += 1
        sr.bytes += pkt.size
        sr.last_hit_us = pkt.time_us
        if marks:
            pkt.mark = True
        if self.sampler.select(pkt):
            st = self.stats
            st.packet_in_count += 1
            st.packet_in_bytes += PACKET_IN_BYTES
            if self.sampled_seqs is not None:
                self.sampled_seqs.append(pkt.seq)
            return Outcome.SAMPLED
        return Outcome.PASSED

    def install_count_rule(self, key: FlowKey, now_us: int = 0, *, local: bool = False) -> int:
        """Install an exact count rule; ``local`` rules are created by the
        switch itself and cost no control traffic."""
        if key in self.rules:
            raise DuplicateRule(f"count rule for {key} already installed on {self.id}")
        if self.cap is not None and len(self.rules) >= self.cap:
            raise CapExceeded(f"{self.id}: count rules would exceed cap {self.cap}")
        rid = self._next_id
        self._next_id += 1
        self.rules[key] = FlowRule(rid, self.COUNT_PRIORITY, key, "count", last_hit_us=now_us)
        if len(self.rules) > self.peak_rules:
            self.peak_rules = len(self.rules)
        if not local:
            self._flowmod()
        return rid

    def remove_count_rule(self, key: FlowKey, *, local: bool = False) -> FlowRule:
        rule = self.rules.pop(key)
        if not local:
            self._flowmod()
        return rule

    def _flowmod(self):
        self.stats.flowmod_count += 1
        self.stats.flowmod_bytes += FLOWMOD_BYTES

    def rotate_sampler(self) -> int:
        sent = self.sampler.rotate()
        if sent:
            self.stats.rotation_count += 1
            self.stats.rotation_bytes += sent
        return sent

    def poll_counters(self) -> list[tuple[FlowKey, int, int]]:
        snapshot = [(k, r.packets, r.bytes) for k, r in sorted(self.rules.items())]
        self.stats.poll_count += 1
        self.stats.poll_reply_bytes += poll_reply_bytes(len(snapshot))
        return snapshot

    def expire_idle_rules(self, now_us: int, idle_timeout_us: int = DEFAULT_IDLE_TIMEOUT_US
                          ) -> list[FlowKey]:
        """Drop count rules idle for longer than the timeout. The switch
        removes them itself, so no FlowMod is accounted."""
        if idle_timeout_us <= 0:
            raise ValueError("idle timeout must be positive")
        stale = sorted(k for k, r in self.rules.items() if now_us - r.last_hit_us > idle_timeout_us)
        for key in stale:
            del self.rules[key]
        return stale

    def reset_peak(self) -> None:
        self.peak_rules = len(self.rules)

    def memory_usage(self, rules: int | None = None) -> int:
        n = len(self.rules) if rules is None else rules
        return n * RULE_BYTES + self.sampler.overhead_bytes


def poll_reply_bytes(rule_count: int) -> int:
    return POLL_REPLY_HEADER_BYTES + POLL_REPLY_ENTRY_BYTES * rule_count
