import math

import numpy as np
import pytest

from samplepick.controller import PickConfig, SamplePickController
from samplepick.distributed import (
    NoRoute, Topology, aggregate_polls, fanout_install, fanout_remove, route_packet,
)
from samplepick.sampling import WeightedSampler
from samplepick.switch import SwitchState

from conftest import key, packet


def switches(n, p=1.0, marks=True, seed=0, **kw):
    return [SwitchState(WeightedSampler(p, np.random.default_rng([seed, i])), id=f"s{i}",
                        honor_marks=marks, **kw) for i in range(n)]


def test_mark_once_sampling_rate():
    p, n = 2**-6, 100_000
    for marks, factor in ((True, 1), (False, 3)):
        sws = switches(3, p, marks)
        topo = Topology(sws, default_path=["s0", "s1", "s2"])
        hits = sum(len(route_packet(topo, packet(key(0), i)).sampled) for i in range(n))
        mean = factor * p
        assert abs(hits / n - mean) <= 3 * math.sqrt(factor * p * (1 - p) / n)


def test_sample_and_count_once():
    sws = switches(3, 1.0)
    topo = Topology(sws, default_path=["s0", "s1", "s2"])
    res = route_packet(topo, packet(key(0)))
    assert res.sampled == ["s0"] and res.egress.mark is False
    for sw in sws:
        sw.install_count_rule(key(1))
    res = route_packet(topo, packet(key(1)))
    assert res.counted == 1 and not res.sampled
    assert [sw.rules[key(1)].packets for sw in sws] == [1, 0, 0]


def test_fanout_costs():
    sws = switches(2)
    topo = Topology(sws, default_path=["s0"])
    ctl = SamplePickController(PickConfig(T=0.5, t=0.2, p=1.0, v=10))
    fanout_install(topo, ctl, key(0))
    assert sum(sw.stats.flowmod_bytes for sw in sws) == 216
    ctl.installed.add(key(0))
    fanout_remove(topo, ctl, key(0))
    assert not any(sw.rules for sw in sws) and key(0) not in ctl.installed


def test_split_flow_summed_across_switches():
    p = 0.01
    ctl = SamplePickController(PickConfig(T=0.5, t=0.1, p=p, v=20))
    sws = switches(2)
    topo = Topology(sws, routes={key(0): [["s0"], ["s1"]]})
    ctl.on_sample(packet(key(0)))
    fanout_install(topo, ctl, key(0))
    for i in range(10):
        route_packet(topo, packet(key(0), i))
    for sw in sws:
        assert sw.rules[key(0)].packets == 5
    before = ctl.total
    aggregate_polls(topo, ctl)
    assert ctl.total == pytest.approx(before + 10 * p)


def test_deltas_from_two_switches():
    ctl = SamplePickController(PickConfig(T=0.5, t=0.1, p=0.1, v=20))
    sws = switches(2)
    topo = Topology(sws, routes={key(0): [["s0"], ["s1"]]})
    ctl.on_sample(packet(key(0)))
    fanout_install(topo, ctl, key(0))
    sws[0].rules[key(0)].packets = 3
    sws[1].rules[key(0)].packets = 7
    before = ctl.total
    aggregate_polls(topo, ctl)
    assert ctl.total - before == pytest.approx(1.0)
    assert ctl.flows[key(0)].exact == 10


def test_poll_order_does_not_matter():
    totals = []
    for order in ([0, 1, 2], [2, 0, 1]):
        sws = switches(3)
        ctl = SamplePickController(PickConfig(T=0.5, t=0.1, p=0.1, v=20))
        for k in range(3):
            ctl.on_sample(packet(key(k)))
        for k in ctl.installed:
            for j, sw in enumerate(sws):
                sw.install_count_rule(k)
                sw.rules[k].packets = 1 + j + 2 * k.src_port % 5
        aggregate_polls(Topology([sws[i] for i in order], default_path=["s0"]), ctl)
        totals.append((ctl.total, {k: ctl.flows[k].exact for k in ctl.installed}))
    assert totals[0] == totals[1]


def test_detects_flow_split_below_threshold_per_switch():
    T, p = 0.3, 1.0
    ctl = SamplePickController(PickConfig(T=T, t=0.2, p=p, v=20))
    sws = switches(2, p)
    routes = {key(0): [["s0"], ["s1"]]}
    routes.update({key(i): ["s0"] if i % 2 else ["s1"] for i in range(1, 9)})
    topo = Topology(sws, routes=routes)
    for i in range(4000):
        k = key(0) if i % 5 < 2 else key(1 + i % 8)
        pkt = packet(k, i)
        for _ in route_packet(topo, pkt).sampled:
            new = ctl.on_sample(pkt)
            if new is not None:
                fanout_install(topo, ctl, new)
        if i % 100 == 99:
            aggregate_polls(topo, ctl)
    aggregate_polls(topo, ctl)
    # each switch sees 0.6 T of the flow but the controller sees all of it
    assert [h.key for h in ctl.report_heavy()] == [key(0)]
    assert ctl.estimate(key(0))[0] == pytest.approx(1600, abs=1)


def test_single_switch_matches_plain_controller():
    cfg = PickConfig(T=0.3, t=0.1, p=0.5, v=30)
    a, b = SamplePickController(cfg), SamplePickController(cfg)
    sa, sb = switches(1, 0.5, seed=4), switches(1, 0.5, seed=4)
    topo = Topology(sb, default_path=["s0"])
    for i in range(3000):
        k = key(i % 3 if i % 2 else i % 40)
        pa, pb = packet(k, i), packet(k, i)
        if sa[0].process_packet(pa).value == "sampled":
            new = a.on_sample(pa)
            if new is not None:
                sa[0].install_count_rule(new)
        for _ in route_packet(topo, pb).sampled:
            new = b.on_sample(pb)
            if new is not None:
                fanout_install(topo, b, new)
        if i % 50 == 49:
            a.on_poll(sa[0].poll_counters())
            aggregate_polls(topo, b)
    assert a.report_heavy() == b.report_heavy()


def test_topology_validation():
    sws = switches(2)
    with pytest.raises(NoRoute):
        Topology(sws).path_for(packet(key(0)))
    with pytest.raises(ValueError):
        Topology(sws, default_path=["s9"])
    with pytest.raises(ValueError):
        Topology(sws, default_path=["s0", "s0"])
    with pytest.raises(ValueError):
        Topology(sws + switches(1))
