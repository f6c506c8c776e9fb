import numpy as np
import pytest

from samplepick.baselines import SampleHHController, SampleHoldController
from samplepick.harness.config import parse_config
from samplepick.harness.runner import Experiment

from conftest import key, packet


def test_hold_one_rule_per_sampled_flow():
    ctl = SampleHoldController(T=0.1, p=0.5)
    for i in range(7):
        assert ctl.on_sample(packet(key(i))) == key(i)
    assert len(ctl.installed) == 7
    with pytest.raises(ValueError):
        ctl.on_sample(packet(key(0)))


def test_hold_estimate():
    ctl = SampleHoldController(T=0.3, p=0.25)
    ctl.on_sample(packet(key(0)))
    ctl.on_sample(packet(key(1)))
    ctl.on_poll([(key(0), 96, 0), (key(1), 4, 0)])
    assert ctl.estimate(key(0)) == 100
    assert ctl.estimated_total() == 8 + 100
    assert [h.key for h in ctl.report_heavy()] == [key(0)]


def test_hh_counts_samples_only():
    ctl = SampleHHController(T=0.4, p=0.5, v=4)
    for i in range(10):
        assert ctl.on_sample(packet(key(i % 2 if i < 8 else 5))) is None
    assert ctl.estimated_total() == 20
    assert [(h.key, h.estimate) for h in ctl.report_heavy()] == [(key(0), 8.0), (key(1), 8.0)]


@pytest.fixture(scope="module")
def runs():
    out = {}
    for algo in ("pick", "hold", "hh"):
        cfg = parse_config({
            "trace": {"zipf": {"flow_count": 2000, "packet_count": 60_000, "rate": 6000}},
            "algorithm": algo, "sampler": {"p": 2**-5},
            "pick": {"T": 0.02, "t": 0.01, "v": 400},
            "interval_len": 2.0, "interval_count": 5, "seed": 1})
        exp = Experiment(cfg)
        exp.run()
        out[algo] = exp
    return out


def test_hh_never_installs(runs):
    sw = runs["hh"].switches[0]
    assert sw.peak_rules == 0 and sw.stats.flowmod_count == 0


def test_hold_installs_locally(runs):
    sw = runs["hold"].switches[0]
    assert len(sw.rules) == len(runs["hold"].controller.installed)
    assert sw.stats.flowmod_bytes == 0


def test_exact_after_install(runs):
    exp = runs["hold"]
    sw = exp.switches[0]
    n = int(np.searchsorted(exp.trace.times_us, 10_000_000))
    flows = exp.trace.flows[:n]
    for k, rule in list(sw.rules.items())[:20]:
        idx = exp.trace.keys.index(k)
        assert rule.packets <= np.count_nonzero(flows == idx)


def test_packet_in_and_memory_ordering(runs):
    rate = {a: runs[a].report.mean("packet_in_rate") for a in runs}
    assert rate["hh"] >= rate["pick"]
    mem = {a: runs[a].report.summary()["switch_memory_bytes"] for a in runs}
    assert mem["hh"] <= mem["pick"] <= mem["hold"]
