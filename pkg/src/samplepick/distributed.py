"""Several monitoring switches under one controller, with mark-once
sampling and counting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .controller import SamplePickController
from .model import FlowKey, Packet
from .switch import Outcome, SwitchState


class NoRoute(LookupError):
    pass


@dataclass
class HopResult:
    counted: int = 0
    sampled: list[str] = field(default_factory=list)
    egress: Packet | None = None


@dataclass
class Topology:
    """Switches plus static routes.

    A route is a path (list of switch ids) or a list of paths; a flow with
    several paths is split across them by packet sequence number.
    """

    switches: list[SwitchState]
    routes: dict[FlowKey, list] = field(default_factory=dict)
    default_path: list[str] | None = None

    def __post_init__(self):
        self.by_id = {sw.id: sw for sw in self.switches}
        if len(self.by_id) != len(self.switches):
            raise ValueError("switch ids must be unique")
        for key, route in self.routes.items():
            for path in self._paths(route):
                self._check_path(path)
        if self.default_path is not None:
            self._check_path(self.default_path)

    @staticmethod
    def _paths(route) -> list[list[str]]:
        if route and isinstance(route[0], str):
            return [list(route)]
        return [list(p) for p in route]

    def _check_path(self, path: Sequence[str]):
        if not path:
            raise ValueError("paths must be non-empty")
        if len(set(path)) != len(path):
            raise ValueError(f"switch repeated on path {path}")
        for sid in path:
            if sid not in self.by_id:
                raise ValueError(f"unknown switch {sid!r} on path {path}")

    def path_for(self, pkt: Packet) -> list[str]:
        route = self.routes.get(pkt.key)
        if route is None:
            if self.default_path is None:
                raise NoRoute(f"no route for {pkt.key}")
            return self.default_path
        paths = self._paths(route)
        return paths[pkt.seq % len(paths)]


def route_packet(topo: Topology, pkt: Packet) -> HopResult:
    """Carry ``pkt`` along its path; the mark is stripped at egress."""
    result = HopResult()
    for sid in topo.path_for(pkt):
        outcome = topo.by_id[sid].process_packet(pkt)
        if outcome is Outcome.COUNTED:
            result.counted += 1
        elif outcome is Outcome.SAMPLED:
            result.sampled.append(sid)
    pkt.mark = False
    result.egress = pkt
    return result


def fanout_install(topo: Topology, controller, key: FlowKey, now_us: int = 0) -> None:
    """Install a count rule for ``key`` on every monitoring switch."""
    for sw in topo.switches:
        sw.install_count_rule(key, now_us)


def fanout_remove(topo: Topology, controller, key: FlowKey) -> None:
    for sw in topo.switches:
        if key in sw.rules:
            sw.remove_count_rule(key)
    controller.on_rule_removed(key)


def aggregate_polls(topo: Topology, controller: SamplePickController) -> None:
    """Poll every switch and feed per-flow summed deltas to the controller,
    as if one switch had counted everything."""
    totals: dict[FlowKey, int] = {}
    for sw in topo.switches:
        for key, delta in controller.poll_deltas(sw.poll_counters(), sw.id).items():
            totals[key] = totals.get(key, 0) + delta
    for key in sorted(totals):
        controller.apply_delta(key, totals[key])
