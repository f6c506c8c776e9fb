"""Reference controllers: Sample&Hold and Sample&HH."""
from __future__ import annotations

from dataclasses import dataclass, field

from .controller import HeavyFlow
from .heavy_hitters import SpaceSaving
from .model import FlowKey, Packet


class SampleHoldController:
    """Every sampled flow gets a count rule for the rest of the run.

    Rules are cloned inside the switch, so installs cost no control
    traffic; counters are read once per reporting interval.
    A flow's estimate is its exact count after install plus 1/p for the
    packets before the sample that revealed it.
    """

    local_installs = True

    def __init__(self, T: float, p: float):
        self.T = T
        self.p = p
        self.installed: set[FlowKey] = set()
        self.counted: dict[FlowKey, int] = {}
        self.samples = 0

    def on_sample(self, pkt: Packet) -> FlowKey:
        if pkt.key in self.installed:
            raise ValueError(f"{pkt.key} already has a hold rule")
        self.samples += 1
        self.installed.add(pkt.key)
        self.counted[pkt.key] = 0
        return pkt.key

    def on_poll(self, snapshot) -> None:
        for key, packets, _ in snapshot:
            self.counted[key] = packets

    def estimate(self, key: FlowKey) -> float:
        return self.counted[key] + 1 / self.p

    def estimated_total(self) -> float:
        return self.samples / self.p + sum(self.counted.values())

    def report_heavy(self) -> list[HeavyFlow]:
        total = self.estimated_total()
        if total <= 0:
            return []
        bar = self.T * total
        out = [HeavyFlow(k, self.estimate(k), self.estimate(k) / total, "exact")
               for k in self.installed if self.estimate(k) >= bar]
        return sorted(out, key=lambda h: (-h.fraction, h.key))



def hold_on_sample(st: SampleHoldController, pkt: Packet) -> FlowKey:
    return st.on_sample(pkt)


class SampleHHController:
    """All samples go to a controller-side Space-Saving structure; the
    switch keeps no count rules."""

    def __init__(self, T: float, p: float, v: int):
        self.T = T
        self.p = p
        self.hh = SpaceSaving(v)

    @property
    def total(self) -> float:
        return self.hh.total

    def on_sample(self, pkt: Packet) -> None:
        self.hh.insert(pkt.key, 1)
        return None

    def estimated_total(self) -> float:
        return self.hh.total / self.p

    def report_heavy(self) -> list[HeavyFlow]:
        total = self.hh.total
        if total <= 0:
            return []
        return [HeavyFlow(k, c / self.p, c / total, "sampled") for k, c in self.hh.query(self.T)]



def hhonly_on_sample(st: SampleHHController, pkt: Packet) -> None:
    st.on_sample(pkt)
