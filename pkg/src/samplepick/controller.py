"""Sample&Pick control logic and parameter derivation."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

from .heavy_hitters import IntervalHH, SpaceSaving
from .model import FlowKey, Packet
from .switch import count_rule_cap


class NegativeDelta(RuntimeError):
    pass


@dataclass(frozen=True)
class PickConfig:
    T: float = 5e-3
    t: float = 2e-3
    p: float = 2**-10
    v: int = 2000
    poll_interval: float = 0.1
    count_mode: str = "packets"
    idle_timeout: float = 5.0
    demote: bool = False

    def __post_init__(self):
        if not 0 < self.t < self.T <= 1:
            raise ValueError("need 0 < t < T <= 1")
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.count_mode not in ("packets", "bytes"):
            raise ValueError("count_mode must be 'packets' or 'bytes'")
        if self.poll_interval <= 0 or self.idle_timeout <= 0:
            raise ValueError("poll_interval and idle_timeout must be positive")
        if self.v < math.ceil(2 / self.t - 1e-9):
            warnings.warn(f"v={self.v} is below 2/t={2 / self.t:g}; installed flows may be evicted "
                          "between polls", stacklevel=2)

    @property
    def cap(self) -> int:
        return count_rule_cap(self.t)


@dataclass(frozen=True)
class HeavyFlow:
    key: FlowKey
    estimate: float
    fraction: float
    mode: str  # "exact", "sampled", or "window" for sliding-window counters


@dataclass
class FlowLedger:
    """What the controller has learned exactly about one flow."""

    last_polled: dict = field(default_factory=dict)  # switch id -> live rule's counter
    exact: int = 0            # sum of all polled deltas, across rule lifetimes
    fed: float = 0.0          # weight fed back into the heavy-hitters module


class SamplePickController:
    """Consumes samples and counter polls; decides which flows get exact
    counters and which are reported heavy.

    Estimated volume of a flow with exact counts is exact + (its sampled
    weight in the heavy-hitters module) / p; otherwise count / p.
    """

    def __init__(self, cfg: PickConfig, hh: SpaceSaving | IntervalHH | None = None):
        self.cfg = cfg
        self.hh = hh if hh is not None else SpaceSaving(cfg.v)
        self.cap = cfg.cap
        self.installed: set[FlowKey] = set()
        self.flows: dict[FlowKey, FlowLedger] = {}
        self.samples = 0
        self.sampled_weight = 0.0
        self.polled_delta = 0
        self.installed_evictions = 0
        self.install_count = 0

    @property
    def total(self) -> float:
        return self.hh.total

    def _insert(self, key, weight):
        evicted = self.hh.insert(key, weight)
        if evicted is not None and evicted in self.installed:
            self.installed_evictions += 1

    def sample_weight(self, pkt: Packet) -> float:
        # with pseudo-byte sampling each sample already stands for 1/p bytes
        return 1.0

    def on_sample(self, pkt: Packet) -> FlowKey | None:
        """Feed one packet-in; returns the key to install a count rule for."""
        key = pkt.key
        w = self.sample_weight(pkt)
        self.samples += 1
        self.sampled_weight += w
        self._insert(key, w)
        if (key not in self.installed and len(self.installed) < self.cap
                and self.hh.count(key) >= self.cfg.t * self.hh.total):
            self.installed.add(key)
            self.flows.setdefault(key, FlowLedger()).last_polled.clear()
            self.install_count += 1
            return key
        return None

    def poll_deltas(self, snapshot: Iterable[tuple[FlowKey, int, int]], source: str = "s0"
                    ) -> dict[FlowKey, int]:
        """Per-flow counter deltas since ``source`` was last polled; records
        the new cumulative values."""
        seen = []
        for key, packets, nbytes in snapshot:
            if key not in self.installed:
                raise KeyError(f"polled counter for {key} which has no installed rule")
            value = nbytes if self.cfg.count_mode == "bytes" else packets
            last = self.flows[key].last_polled.get(source, 0)
            if value < last:
                raise NegativeDelta(f"{source}: counter for {key} went backwards ({last} -> {value})")
            seen.append((key, value, value - last))
        deltas = {}
        for key, value, delta in seen:
            self.flows[key].last_polled[source] = value
            deltas[key] = delta
        return deltas

    def on_poll(self, snapshot: Iterable[tuple[FlowKey, int, int]], source: str = "s0") -> None:
        """Fold cumulative switch counters back in, scaled by p."""
        deltas = self.poll_deltas(snapshot, source)
        for key in sorted(deltas):
            self.apply_delta(key, deltas[key])

    def apply_delta(self, key: FlowKey, delta: int) -> None:
        if delta < 0:
            raise NegativeDelta(f"negative delta {delta} for {key}")
        if delta == 0:
            return
        led = self.flows[key]
        weight = delta * self.cfg.p
        led.exact += delta
        led.fed += weight
        self.polled_delta += delta
        self._insert(key, weight)

    def on_rule_removed(self, key: FlowKey) -> None:
        """The switch dropped ``key``'s rule (idle expiry or demotion)."""
        self.installed.discard(key)
        if key in self.flows:
            self.flows[key].last_polled.clear()

    def demotions(self) -> list[FlowKey]:
        """Installed flows whose estimate fell below t of the total; the
        caller removes their rules after a poll."""
        if not self.cfg.demote:
            return []
        bar = self.cfg.t * self.hh.total
        return sorted(k for k in self.installed if self.hh.count(k) < bar)

    def estimate(self, key: FlowKey) -> tuple[float, str]:
        p = self.cfg.p
        count = self.hh.count(key)
        if isinstance(self.hh, IntervalHH):
            return count / p, "window"
        led = self.flows.get(key)
        if led is not None and led.exact:
            return led.exact + max(0.0, count - led.fed) / p, "exact"
        return count / p, "sampled"

    def report_heavy(self) -> list[HeavyFlow]:
        total = self.hh.total
        if total <= 0:
            return []
        bar = self.cfg.T * total
        out = []
        for key, e in self.hh.entries.items():
            count = e.count if isinstance(self.hh, SpaceSaving) else e.accum
            if count >= bar:
                est, mode = self.estimate(key)
                out.append(HeavyFlow(key, est, count / total, mode))
        return sorted(out, key=lambda h: (-h.fraction, h.key))

    def estimated_total(self) -> float:
        return self.hh.total / self.cfg.p



def on_sample(st: SamplePickController, pkt: Packet):
    return st.on_sample(pkt)


def on_poll(st: SamplePickController, snapshot, p: float | None = None):
    if p is not None and p != st.cfg.p:
        raise ValueError("p differs from the controller's configured p")
    st.on_poll(snapshot)


def report_heavy(st: SamplePickController):
    return st.report_heavy()


@dataclass(frozen=True)
class DerivedParams:
    t_max: float
    T_min: float
    v_min: int | None
    feasible: bool


def derive_params(T: float, p: float, N: float, t: float | None = None) -> DerivedParams:
    """Largest safe suspicion threshold, smallest detectable heavy fraction,
    and counter capacity for threshold ``T``, sampling rate ``p`` and ``N``
    packets.

    t_max = T - 3 sqrt(T (1 - p)) / sqrt(N p)
    T_min = 9 (1 - p) / (N p)
    v_min = ceil(2 / t) for the chosen t (defaults to t_max when feasible)
    """
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < T <= 1:
        raise ValueError("T must be in (0, 1]")
    n = N * p
    t_max = T - 3 * math.sqrt(T * (1 - p)) / math.sqrt(n)
    T_min = 9 * (1 - p) / n
    feasible = T > T_min
    chosen = t if t is not None else (t_max if feasible else None)
    v_min = math.ceil(2 / chosen - 1e-9) if chosen and chosen > 0 else None
    return DerivedParams(t_max, T_min, v_min, feasible)
