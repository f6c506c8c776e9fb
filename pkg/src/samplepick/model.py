"""Packets, flow keys, traces and the virtual clock."""
from __future__ import annotations

import hashlib
import heapq
import ipaddress
import itertools
from decimal import Decimal, InvalidOperation
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

MIN_PACKET_SIZE = 64
MAX_PACKET_SIZE = 1500
US_PER_S = 1_000_000


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True, order=True)
class FlowKey:
    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    proto: int

    def __str__(self) -> str:
        return (f"{ipaddress.IPv4Address(self.src_ip)}:{self.src_port}->"
                f"{ipaddress.IPv4Address(self.dst_ip)}:{self.dst_port}/{self.proto}")

    def to_bytes(self) -> bytes:
        return (self.src_ip.to_bytes(4, "big") + self.dst_ip.to_bytes(4, "big")
                + self.src_port.to_bytes(2, "big") + self.dst_port.to_bytes(2, "big")
                + self.proto.to_bytes(1, "big"))


class Packet:
    """One packet as seen by the switch pipeline.

    ``time_us`` is virtual time in integer microseconds. ``seq`` is the
    packet's position in its trace and serves as its identity.
    """

    __slots__ = ("time_us", "key", "size", "checksum", "mark", "seq")

    def __init__(self, time_us: int, key: FlowKey, size: int, checksum: int,
                 mark: bool = False, seq: int = 0):
        self.time_us = time_us
        self.key = key
        self.size = size
        self.checksum = checksum
        self.mark = mark
        self.seq = seq

    @property
    def time(self) -> float:
        return self.time_us / US_PER_S

    def copy(self) -> Packet:
        return Packet(self.time_us, self.key, self.size, self.checksum, self.mark, self.seq)

    def _astuple(self):
        return (self.time_us, self.key, self.size, self.checksum, self.mark, self.seq)

    def __eq__(self, other):
        if not isinstance(other, Packet):
            return NotImplemented
        return self._astuple() == other._astuple()

    def __repr__(self):
        return (f"Packet(time={format_time(self.time_us)}, key={self.key}, size={self.size}, "
                f"checksum={self.checksum}, mark={self.mark})")


# -- virtual time -------------------------------------------------------------

def seconds_to_us(value: float | str) -> int:
    """Convert seconds (float or decimal text) to integer microseconds."""
    if isinstance(value, str):
        try:
            us = Decimal(value.strip()) * US_PER_S
        except InvalidOperation as exc:
            raise ValueError(f"not a decimal number: {value!r}") from exc
        if not us.is_finite() or us != us.to_integral_value():
            raise ValueError(f"not a whole number of microseconds: {value!r}")
        return int(us)
    return int(round(value * US_PER_S))


def format_time(time_us: int) -> str:
    whole, frac = divmod(time_us, US_PER_S)
    frac_text = f"{frac:06d}".rstrip("0") or "0"
    return f"{whole}.{frac_text}"


class VirtualClock:
    """Monotone virtual clock with a timer queue.

    Timers fire in (due time, priority, scheduling order); a timer due at
    the same instant as a packet fires before that packet.
    """

    def __init__(self, now_us: int = 0):
        self.now_us = now_us
        self._timers: list = []
        self._order = itertools.count()

    @property
    def now(self) -> float:
        return self.now_us / US_PER_S

    def advance(self, time_us: int) -> None:
        if time_us < self.now_us:
            raise ValueError(f"clock cannot go backwards ({time_us} < {self.now_us})")
        self.now_us = time_us

    def schedule(self, due_us: int, callback: Callable[[int], None], priority: int = 0) -> None:
        if due_us < self.now_us:
            raise ValueError("cannot schedule a timer in the past")
        heapq.heappush(self._timers, (due_us, priority, next(self._order), callback))

    @property
    def next_due(self) -> int | None:
        return self._timers[0][0] if self._timers else None

    def run_until(self, time_us: int) -> None:
        """Fire every timer due at or before ``time_us``, then move to it."""
        timers = self._timers
        while timers and timers[0][0] <= time_us:
            due, _, _, callback = heapq.heappop(timers)
            self.advance(due)
            callback(due)
        self.advance(time_us)


# -- checksums ----------------------------------------------------------------

def synthesize_checksum(fields: Sequence, seed: int = 0) -> int:
    """Deterministic pseudo-random 16-bit checksum for a record."""
    h = hashlib.blake2b(digest_size=2, key=int(seed).to_bytes(8, "big", signed=False))
    h.update("|".join(str(f) for f in fields).encode())
    return int.from_bytes(h.digest(), "big")


# -- CSV trace records --------------------------------------------------------

def _parse_ip(text: str) -> int:
    try:
        return int(ipaddress.IPv4Address(text.strip()))
    except ValueError as exc:
        raise MalformedRecord(f"bad address {text!r}") from exc


def _parse_int(text: str, name: str, lo: int, hi: int) -> int:
    text = text.strip()
    if not text.isdigit():
        raise MalformedRecord(f"{name} is not a non-negative integer: {text!r}")
    value = int(text)
    if not lo <= value <= hi:
        raise MalformedRecord(f"{name}={value} outside [{lo}, {hi}]")
    return value


def parse_trace_record(line: str, *, seed: int = 0, previous_us: int | None = None,
                       seq: int = 0) -> Packet:
    """Parse ``time,src_ip,dst_ip,src_port,dst_port,proto,size[,checksum]``.

    A missing checksum is synthesized from the record text and ``seed``.
    ``previous_us`` is the time of the preceding record, if any.
    """
    cols = line.strip().split(",")
    if len(cols) not in (7, 8):
        raise MalformedRecord(f"expected 7 or 8 columns, got {len(cols)}")
    try:
        time_us = seconds_to_us(cols[0])
    except ValueError as exc:
        raise MalformedRecord(str(exc)) from exc
    if time_us < 0:
        raise MalformedRecord("negative time")
    if previous_us is not None and time_us < previous_us:
        raise MalformedRecord(f"time {cols[0]} is earlier than the previous record")
    key = FlowKey(_parse_ip(cols[1]), _parse_ip(cols[2]),
                  _parse_int(cols[3], "src_port", 0, 0xFFFF),
                  _parse_int(cols[4], "dst_port", 0, 0xFFFF),
                  _parse_int(cols[5], "proto", 0, 0xFF))
    size = _parse_int(cols[6], "size", MIN_PACKET_SIZE, MAX_PACKET_SIZE)
    if len(cols) == 8:
        checksum = _parse_int(cols[7], "checksum", 0, 0xFFFF)
    else:
        checksum = synthesize_checksum([c.strip() for c in cols], seed)
    return Packet(time_us, key, size, checksum, False, seq)


def format_trace_record(pkt: Packet) -> str:
    k = pkt.key
    return ",".join([
        format_time(pkt.time_us), str(ipaddress.IPv4Address(k.src_ip)),
        str(ipaddress.IPv4Address(k.dst_ip)), str(k.src_port), str(k.dst_port),
        str(k.proto), str(pkt.size), str(pkt.checksum),
    ])


TRACE_HEADER = "time,src_ip,dst_ip,src_port,dst_port,proto,size,checksum"


def read_trace(lines: Iterable[str], seed: int = 0) -> Iterator[Packet]:
    previous = None
    seq = 0
    for lineno, line in enumerate(lines, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if text.startswith("time,"):
            continue
        try:
            pkt = parse_trace_record(text, seed=seed, previous_us=previous, seq=seq)
        except MalformedRecord as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from exc
        previous = pkt.time_us
        seq += 1
        yield pkt


def write_trace(packets: Iterable[Packet], path) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for pkt in packets:
            fh.write(format_trace_record(pkt) + "\n")


# -- columnar traces ----------------------------------------------------------

@dataclass
class Trace:
    """A time-sorted packet stream stored column-wise.

    ``flows[i]`` indexes into ``keys``; iteration yields Packet objects.
    """

    keys: list[FlowKey]
    times_us: np.ndarray
    flows: np.ndarray
    sizes: np.ndarray
    checksums: np.ndarray

    def __len__(self) -> int:
        return len(self.times_us)

    def __iter__(self) -> Iterator[Packet]:
        keys = self.keys
        for i, (t, f, s, c) in enumerate(zip(self.times_us.tolist(), self.flows.tolist(),
                                             self.sizes.tolist(), self.checksums.tolist())):
            yield Packet(t, keys[f], s, c, False, i)

    @classmethod
    def from_packets(cls, packets: Iterable[Packet]) -> Trace:
        index: dict[FlowKey, int] = {}
        keys: list[FlowKey] = []
        times, flows, sizes, sums = [], [], [], []
        for pkt in packets:
            fid = index.get(pkt.key)
            if fid is None:
                fid = index[pkt.key] = len(keys)
                keys.append(pkt.key)
            times.append(pkt.time_us)
            flows.append(fid)
            sizes.append(pkt.size)
            sums.append(pkt.checksum)
        return cls(keys, np.asarray(times, dtype=np.int64), np.asarray(flows, dtype=np.int64),
                   np.asarray(sizes, dtype=np.int64), np.asarray(sums, dtype=np.int64))

    @classmethod
    def from_csv(cls, path, seed: int = 0) -> Trace:
        with open(path) as fh:
            return cls.from_packets(read_trace(fh, seed))


# -- synthetic Zipf traffic ---------------------------------------------------

DEFAULT_SIZE_DIST = {64: 0.45, 576: 0.15, 1500: 0.40}


@dataclass(frozen=True)
class ZipfConfig:
    flow_count: int = 50_000
    alpha: float = 1.1
    packet_count: int = 1_000_000
    rate: float = 20_000.0
    size_dist: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_SIZE_DIST))
    seed: int = 0
    zero_checksum_flows: int = 0  # top-ranked flows crafted with checksum 0

    def __post_init__(self):
        if self.flow_count < 1:
            raise ValueError("flow_count must be >= 1")
        if self.packet_count < 1:
            raise ValueError("packet_count must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.rate <= 0:
            raise ValueError("rate must be > 0")
        if not 0 <= self.zero_checksum_flows <= self.flow_count:
            raise ValueError("zero_checksum_flows must be in [0, flow_count]")
        for size, weight in self.size_dist.items():
            if not MIN_PACKET_SIZE <= int(size) <= MAX_PACKET_SIZE or weight < 0:
                raise ValueError(f"bad size_dist entry {size}: {weight}")


def zipf_weights(flow_count: int, alpha: float) -> np.ndarray:
    """Normalized Zipf rank masses, rank 1 first."""
    w = np.arange(1, flow_count + 1, dtype=np.float64) ** -alpha
    return w / w.sum()


def _unique_keys(rng: np.random.Generator, count: int) -> list[FlowKey]:
    keys: list[FlowKey] = []
    seen: set[FlowKey] = set()
    while len(keys) < count:
        need = count - len(keys)
        src = rng.integers(0, 2**32, need, dtype=np.uint64).tolist()
        dst = rng.integers(0, 2**32, need, dtype=np.uint64).tolist()
        sport = rng.integers(1024, 65536, need).tolist()
        dport = rng.integers(1, 65536, need).tolist()
        proto = rng.choice([6, 17], need).tolist()
        for k in map(FlowKey, src, dst, sport, dport, proto):
            if k not in seen:
                seen.add(k)
                keys.append(k)
    return keys


def generate_zipf_trace(cfg: ZipfConfig) -> Trace:
    """Synthetic Zipf-popularity trace; a pure function of ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    keys = _unique_keys(rng, cfg.flow_count)
    n = cfg.packet_count
    flows = rng.choice(cfg.flow_count, size=n, p=zipf_weights(cfg.flow_count, cfg.alpha))
    sizes_v = np.array(sorted(int(s) for s in cfg.size_dist), dtype=np.int64)
    probs = np.array([cfg.size_dist[s] for s in sorted(cfg.size_dist)], dtype=np.float64)
    sizes = sizes_v[rng.choice(len(sizes_v), size=n, p=probs / probs.sum())]
    checksums = rng.integers(0, 1 << 16, n, dtype=np.int64)
    if cfg.zero_checksum_flows:
        checksums[flows < cfg.zero_checksum_flows] = 0
    times = np.round(np.arange(n, dtype=np.float64) * (US_PER_S / cfg.rate)).astype(np.int64)
    return Trace(keys, times, flows.astype(np.int64), sizes, checksums)
