"""Experiment configuration: a single JSON document, validated with
field paths in error messages."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from ..controller import PickConfig
from ..model import DEFAULT_SIZE_DIST, ZipfConfig
from ..sampling import SAMPLERS, evasion_window

ALGORITHMS = ("pick", "hold", "hh")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "weighted"
    p: float = 2**-10
    rotate_interval: float = 1.0
    policy: str = "ceil_log2"


@dataclass(frozen=True)
class TopologyConfig:
    switches: tuple[str, ...] = ("s0",)
    paths: tuple[tuple[str, ...], ...] = (("s0",),)
    split: bool = False
    marking: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    trace_file: str | None = None
    zipf: ZipfConfig | None = None
    algorithm: str = "pick"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    pick: PickConfig = field(default_factory=PickConfig)
    interval_len: float = 5.0
    interval_count: int = 10
    topology: TopologyConfig | None = None
    seed: int = 0

    def with_seed(self, seed: int) -> ExperimentConfig:
        zipf = replace(self.zipf, seed=seed) if self.zipf is not None else None
        return replace(self, seed=seed, zipf=zipf)

    def header(self) -> dict[str, Any]:
        """Flat parameter echo for reports."""
        out: dict[str, Any] = {"algorithm": self.algorithm, "seed": self.seed}
        if self.zipf is not None:
            z = self.zipf
            out.update({"trace": "zipf", "flow_count": z.flow_count, "alpha": z.alpha,
                        "packet_count": z.packet_count, "rate": z.rate})
            if z.zero_checksum_flows:
                out["zero_checksum_flows"] = z.zero_checksum_flows
        else:
            out["trace"] = self.trace_file
        out.update({"sampler": self.sampler.kind, "p": self.sampler.p,
                    "T": self.pick.T, "t": self.pick.t, "v": self.pick.v,
                    "poll_interval": self.pick.poll_interval, "count_mode": self.pick.count_mode,
                    "interval_len": self.interval_len, "interval_count": self.interval_count})
        if self.sampler.kind in ("hash_match", "hash_compare"):
            out["evasion_window_s"] = evasion_window(self.sampler.p, 1 / self.sampler.rotate_interval)
        if self.topology is not None:
            out["switches"] = len(self.topology.switches)
        return out


def _get(d: dict, key: str, path: str, kind, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}".lstrip("."), "is required")
        return default
    value = d[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool) and kind is not bool):
        raise ConfigError(f"{path}.{key}".lstrip("."), f"expected {kind.__name__}, got {value!r}")
    return value


def _check_keys(d: dict, allowed: set[str], path: str):
    if not isinstance(d, dict):
        raise ConfigError(path or "<root>", "expected an object")
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}".lstrip("."), "unknown field")


def _prob(value: float, path: str) -> float:
    if not 0 < value <= 1:
        raise ConfigError(path, f"must be in (0, 1], got {value}")
    return value


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(raw, {"trace", "algorithm", "sampler", "pick", "interval_len",
                      "interval_count", "topology", "seed"}, "")
    seed = _get(raw, "seed", "", int, 0)

    trace = raw.get("trace")
    if trace is None:
        raise ConfigError("trace", "is required")
    _check_keys(trace, {"file", "zipf"}, "trace")
    if ("file" in trace) == ("zipf" in trace):
        raise ConfigError("trace", "give exactly one of 'file' or 'zipf'")
    trace_file = zipf = None
    if "file" in trace:
        trace_file = _get(trace, "file", "trace", str)
    else:
        z = trace["zipf"]
        _check_keys(z, {"flow_count", "alpha", "packet_count", "rate", "size_dist",
                        "zero_checksum_flows"}, "trace.zipf")
        sizes = _get(z, "size_dist", "trace.zipf", dict, dict(DEFAULT_SIZE_DIST))
        try:
            zipf = ZipfConfig(
                flow_count=_get(z, "flow_count", "trace.zipf", int, 50_000),
                alpha=_get(z, "alpha", "trace.zipf", float, 1.1),
                packet_count=_get(z, "packet_count", "trace.zipf", int, 1_000_000),
                rate=_get(z, "rate", "trace.zipf", float, 20_000.0),
                size_dist={int(k): float(v) for k, v in sizes.items()},
                seed=seed,
                zero_checksum_flows=_get(z, "zero_checksum_flows", "trace.zipf", int, 0))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("trace.zipf", str(exc)) from exc

    algorithm = _get(raw, "algorithm", "", str, "pick")
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"must be one of {', '.join(ALGORITHMS)}")

    s = raw.get("sampler", {})
    _check_keys(s, {"kind", "p", "rotate_interval", "policy"}, "sampler")
    kind = _get(s, "kind", "sampler", str, "weighted")
    if kind not in SAMPLERS:
        raise ConfigError("sampler.kind", f"must be one of {', '.join(sorted(SAMPLERS))}")
    sampler = SamplerConfig(
        kind=kind, p=_prob(_get(s, "p", "sampler", float, 2**-10), "sampler.p"),
        rotate_interval=_get(s, "rotate_interval", "sampler", float, 1.0),
        policy=_get(s, "policy", "sampler", str, "ceil_log2"))
    if sampler.rotate_interval <= 0:
        raise ConfigError("sampler.rotate_interval", "must be positive")
    if sampler.policy not in ("ceil_log2", "nearest"):
        raise ConfigError("sampler.policy", "must be 'ceil_log2' or 'nearest'")

    pk = raw.get("pick", {})
    _check_keys(pk, {"T", "t", "v", "poll_interval", "count_mode", "idle_timeout", "demote"}, "pick")
    T = _prob(_get(pk, "T", "pick", float, 5e-3), "pick.T")
    t = _prob(_get(pk, "t", "pick", float, 2e-3), "pick.t")
    if not t < T:
        raise ConfigError("pick.t", "must be smaller than pick.T")
    try:
        pick = PickConfig(T=T, t=t, p=sampler.p, v=_get(pk, "v", "pick", int, 2000),
                          poll_interval=_get(pk, "poll_interval", "pick", float, 0.1),
                          count_mode=_get(pk, "count_mode", "pick", str, "packets"),
                          idle_timeout=_get(pk, "idle_timeout", "pick", float, 5.0),
                          demote=_get(pk, "demote", "pick", bool, False))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("pick", str(exc)) from exc

    interval_len = _get(raw, "interval_len", "", float, 5.0)
    if interval_len <= 0:
        raise ConfigError("interval_len", "must be positive")
    interval_count = _get(raw, "interval_count", "", int, 10)
    if interval_count < 1:
        raise ConfigError("interval_count", "must be >= 1")

    topology = None
    if "topology" in raw:
        tp = raw["topology"]
        _check_keys(tp, {"switches", "paths", "split", "marking"}, "topology")
        switches = _get(tp, "switches", "topology", list, required=True)
        if not switches or not all(isinstance(x, str) for x in switches):
            raise ConfigError("topology.switches", "must be a non-empty list of ids")
        if len(set(switches)) != len(switches):
            raise ConfigError("topology.switches", "ids must be unique")
        paths = _get(tp, "paths", "topology", list, [switches[:1]])
        for i, path in enumerate(paths):
            if not isinstance(path, list) or not path:
                raise ConfigError(f"topology.paths[{i}]", "must be a non-empty list")
            for sid in path:
                if sid not in switches:
                    raise ConfigError(f"topology.paths[{i}]", f"unknown switch {sid!r}")
            if len(set(path)) != len(path):
                raise ConfigError(f"topology.paths[{i}]", "switch repeated on path")
        topology = TopologyConfig(tuple(switches), tuple(tuple(p) for p in paths),
                                  _get(tp, "split", "topology", bool, False),
                                  _get(tp, "marking", "topology", bool, True))

    return ExperimentConfig(trace_file=trace_file, zipf=zipf, algorithm=algorithm,
                            sampler=sampler, pick=pick, interval_len=interval_len,
                            interval_count=interval_count, topology=topology, seed=seed)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(raw)
