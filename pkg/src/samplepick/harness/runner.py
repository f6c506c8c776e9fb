"""Event loop that drives a trace through switches and a controller."""
from __future__ import annotations

import math

import numpy as np

from ..baselines import SampleHHController, SampleHoldController
from ..controller import SamplePickController
from ..distributed import Topology, aggregate_polls, fanout_install, fanout_remove, route_packet
from ..model import Packet, Trace, US_PER_S, VirtualClock, generate_zipf_trace
from ..sampling import make_sampler
from ..switch import Outcome, SwitchState
from .config import ExperimentConfig
from .metrics import IntervalMetrics, MetricsReport, score
from .oracle import ground_truth


def load_trace(cfg: ExperimentConfig) -> Trace:
    if cfg.zipf is not None:
        return generate_zipf_trace(cfg.zipf)
    return Trace.from_csv(cfg.trace_file, seed=cfg.seed)


def _us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


class Experiment:
    """One deterministic run of ``cfg`` over ``trace``.

    After ``run()`` the switches, controller and per-interval truths stay
    available for inspection.
    """

    def __init__(self, cfg: ExperimentConfig, trace: Trace | None = None):
        self.cfg = cfg
        self.trace = trace if trace is not None else load_trace(cfg)
        self.clock = VirtualClock()
        self.controller = self._make_controller()
        self.switches = self._make_switches()
        self.topology = self._make_topology()
        self.truths = []
        self.max_rules_seen = 0
        self._last_poll_us = -1
        self._stats_mark = self._stats_totals()

    # -- construction -----------------------------------------------------

    def _make_controller(self):
        cfg = self.cfg
        if cfg.algorithm == "pick":
            return SamplePickController(cfg.pick)
        if cfg.algorithm == "hold":
            return SampleHoldController(cfg.pick.T, cfg.sampler.p)
        return SampleHHController(cfg.pick.T, cfg.sampler.p, cfg.pick.v)

    def _make_switches(self) -> list[SwitchState]:
        cfg = self.cfg
        ids = cfg.topology.switches if cfg.topology else ("s0",)
        marks = cfg.topology.marking if cfg.topology else True
        cap = cfg.pick.cap if cfg.algorithm == "pick" else None
        options = {"policy": cfg.sampler.policy} if cfg.sampler.kind == "geometric" else {}
        out = []
        for i, sid in enumerate(ids):
            rng = np.random.default_rng([cfg.seed, 7919, i])
            sampler = make_sampler(cfg.sampler.kind, cfg.sampler.p, rng, **options)
            out.append(SwitchState(sampler, id=sid, cap=cap, honor_marks=marks))
        return out

    def _make_topology(self) -> Topology:
        tp = self.cfg.topology
        if tp is None:
            return Topology(self.switches, default_path=[self.switches[0].id])
        paths = [list(p) for p in tp.paths]
        routes = {}
        for i, key in enumerate(self.trace.keys):
            routes[key] = paths if tp.split else paths[i % len(paths)]
        return Topology(self.switches, routes=routes)

    # -- timers -----------------------------------------------------------

    def _poll(self, now_us: int) -> None:
        if now_us == self._last_poll_us:
            return
        self._last_poll_us = now_us
        ctl = self.controller
        if isinstance(ctl, SampleHoldController):
            for sw in self.switches:
                ctl.on_poll(sw.poll_counters())
            return
        if not isinstance(ctl, SamplePickController):
            return
        aggregate_polls(self.topology, ctl)
        for key in ctl.demotions():
            fanout_remove(self.topology, ctl, key)
        self._expire(now_us)

    def _expire(self, now_us: int) -> None:
        timeout = _us(self.cfg.pick.idle_timeout)
        ctl = self.controller
        if len(self.switches) == 1:
            for key in self.switches[0].expire_idle_rules(now_us, timeout):
                ctl.on_rule_removed(key)
            return
        # a fanned-out rule goes only once it is idle everywhere
        for key in sorted(ctl.installed):
            if all(now_us - sw.rules[key].last_hit_us > timeout for sw in self.switches):
                for sw in self.switches:
                    sw.remove_count_rule(key, local=True)
                ctl.on_rule_removed(key)

    def _poll_timer(self, now_us: int) -> None:
        self._poll(now_us)
        self.clock.schedule(now_us + _us(self.cfg.pick.poll_interval), self._poll_timer)

    def _rotate_timer(self, now_us: int) -> None:
        for sw in self.switches:
            sw.rotate_sampler()
        self.clock.schedule(now_us + _us(self.cfg.sampler.rotate_interval), self._rotate_timer)

    def _stats_totals(self) -> dict:
        keys = ("packet_in_count", "to_switch_bytes", "to_controller_bytes")
        return {k: sum(getattr(sw.stats, k) for sw in self.switches) for k in keys}

    def _interval_timer(self, k: int):
        def fire(now_us: int) -> None:
            if not isinstance(self.controller, SampleHHController):
                self._poll(now_us)
            self._record(k, now_us)
        return fire

    def _record(self, k: int, now_us: int) -> None:
        cfg = self.cfg
        truth = ground_truth(self.trace, cfg.pick.T, now_us / US_PER_S,
                             by_bytes=cfg.pick.count_mode == "bytes")
        self.truths.append(truth)
        fn, fp, err, n_rep = score(self.controller.report_heavy(), truth)
        totals = self._stats_totals()
        delta = {name: totals[name] - self._stats_mark[name] for name in totals}
        self._stats_mark = totals
        peak = sum(sw.peak_rules for sw in self.switches)
        memory = sum(sw.memory_usage(sw.peak_rules) for sw in self.switches)
        for sw in self.switches:
            sw.reset_peak()
        length = cfg.interval_len
        prev_end = _us(length * k)
        packets = int(np.searchsorted(self.trace.times_us, now_us, side="left")
                      - np.searchsorted(self.trace.times_us, prev_end, side="left"))
        self.report.intervals.append(IntervalMetrics(
            interval=k + 1, heavy_true=len(truth.heavy), heavy_reported=n_rep,
            fn_rate=fn, fp_rate=fp, counter_error=err,
            switch_rules_max=peak, switch_memory_bytes=memory,
            to_switch_bytes_per_s=delta["to_switch_bytes"] / length,
            to_controller_bytes_per_s=delta["to_controller_bytes"] / length,
            control_traffic_bytes_per_s=(delta["to_switch_bytes"] + delta["to_controller_bytes"]) / length,
            packet_in_rate=delta["packet_in_count"] / length,
            packets=packets))

    # -- main loop --------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.cfg
        self.report = MetricsReport(cfg.header())
        clock = self.clock
        end_us = _us(cfg.interval_len * cfg.interval_count)
        if isinstance(self.controller, SamplePickController):
            clock.schedule(_us(cfg.pick.poll_interval), self._poll_timer)
        if self.switches[0].sampler.rotating:
            clock.schedule(_us(cfg.sampler.rotate_interval), self._rotate_timer)
        # reports go last at their instant so each interval owns the timers in (start, end]
        for k in range(cfg.interval_count):
            clock.schedule(_us(cfg.interval_len * (k + 1)), self._interval_timer(k), priority=1)

        tr = self.trace
        n = int(np.searchsorted(tr.times_us, end_us, side="left"))
        times = tr.times_us[:n].tolist()
        flows = tr.flows[:n].tolist()
        sizes = tr.sizes[:n].tolist()
        sums = tr.checksums[:n].tolist()
        keys = tr.keys

        ctl = self.controller
        on_sample = ctl.on_sample
        topo = self.topology
        single = len(self.switches) == 1
        process = self.switches[0].process_packet
        local = isinstance(ctl, SampleHoldController)
        SAMPLED = Outcome.SAMPLED
        pkt = Packet(0, keys[0] if keys else None, 64, 0)
        next_due = clock.next_due if clock.next_due is not None else math.inf

        for i in range(n):
            t = times[i]
            if t >= next_due:
                clock.run_until(t)
                nd = clock.next_due
                next_due = nd if nd is not None else math.inf
            pkt.time_us = t
            pkt.key = keys[flows[i]]
            pkt.size = sizes[i]
            pkt.checksum = sums[i]
            pkt.mark = False
            pkt.seq = i
            if single:
                hits = 1 if process(pkt) is SAMPLED else 0
            else:
                hits = len(route_packet(topo, pkt).sampled)
            for _ in range(hits):
                if local and pkt.key in ctl.installed:
                    break
                key = on_sample(pkt)
                if key is not None:
                    if local:
                        for sw in self.switches:
                            sw.install_count_rule(key, t, local=True)
                    else:
                        fanout_install(topo, ctl, key, t)
                    rules = len(self.switches[0].rules)
                    if rules > self.max_rules_seen:
                        self.max_rules_seen = rules
        clock.run_until(end_us)
        return self.report


def run_experiment(cfg: ExperimentConfig, trace: Trace | None = None) -> MetricsReport:
    return Experiment(cfg, trace).run()
