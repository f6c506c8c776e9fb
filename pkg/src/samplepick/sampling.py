"""Packet and pseudo-byte samplers built from match-action primitives.

Each mechanism comes in two forms: a per-packet function matching what a
switch rule would decide, and a sampler object that a switch holds as its
catch-all sampling stage. Vectorized ``*_many`` helpers evaluate the same
decisions over numpy arrays for rate measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import MAX_PACKET_SIZE, MIN_PACKET_SIZE, Packet

CHECKSUM_BITS = 16
PATTERN_FLOWMOD_BYTES = 108
R_FLOWMOD_BYTES = 110
ENTRY_BYTES = 20


class SizeOutOfRange(ValueError):
    pass


# -- ternary patterns ---------------------------------------------------------

@dataclass(frozen=True)
class TernaryPattern:
    value: int
    mask: int

    def __post_init__(self):
        if self.value & ~self.mask:
            raise ValueError("pattern value has bits outside its mask")

    @property
    def k(self) -> int:
        return bin(self.mask).count("1")

    def matches(self, x: int) -> bool:
        return (x & self.mask) == self.value

    def __str__(self) -> str:
        bits = []
        for i in reversed(range(CHECKSUM_BITS)):
            bit = 1 << i
            bits.append("*" if not self.mask & bit else "1" if self.value & bit else "0")
        return "".join(bits)


def hash_match_sample(pkt: Packet, pat: TernaryPattern) -> bool:
    return (pkt.checksum & pat.mask) == pat.value


def hash_match_many(checksums: np.ndarray, pat: TernaryPattern) -> np.ndarray:
    return (checksums & pat.mask) == pat.value


def rotate_pattern(k: int, rng: np.random.Generator) -> TernaryPattern:
    """Random ternary pattern with ``k`` fixed bits over the 16-bit checksum."""
    if not 0 <= k <= CHECKSUM_BITS:
        raise ValueError("k must be in [0, 16]")
    positions = rng.choice(CHECKSUM_BITS, size=k, replace=False)
    bits = rng.integers(0, 2, size=k)
    mask = value = 0
    for pos, bit in zip(positions.tolist(), bits.tolist()):
        mask |= 1 << pos
        value |= bit << pos
    return TernaryPattern(value, mask)


# -- group based selection ----------------------------------------------------

@dataclass(frozen=True)
class WeightedGroup:
    active_weight: int = 1
    dummy_weight: int = 0

    def __post_init__(self):
        if self.active_weight < 1 or self.dummy_weight < 0:
            raise ValueError("need active_weight >= 1 and dummy_weight >= 0")

    @classmethod
    def for_probability(cls, p: float) -> WeightedGroup:
        """Active bucket weight 1, dummy weight ceil(1/p) - 1."""
        if not 0 < p <= 1:
            raise ValueError("p must be in (0, 1]")
        return cls(1, math.ceil(1 / p - 1e-12) - 1)

    @property
    def total(self) -> int:
        return self.active_weight + self.dummy_weight

    @property
    def probability(self) -> float:
        return self.active_weight / self.total


def weighted_select_sample(pkt: Packet, g: WeightedGroup, rng: np.random.Generator) -> bool:
    return int(rng.integers(0, g.total)) < g.active_weight


def weighted_select_many(n: int, g: WeightedGroup, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, g.total, size=n) < g.active_weight


@dataclass
class RoundRobinChain:
    """Chained round-robin groups; a packet is selected when it lands on
    the active (last) bucket of every group in the chain."""

    group_sizes: list[int]
    cursors: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.group_sizes or any(s < 1 for s in self.group_sizes):
            raise ValueError("group sizes must be >= 1")
        if not self.cursors:
            self.cursors = [0] * len(self.group_sizes)

    @classmethod
    def for_probability(cls, p: float, group_size: int = 2) -> RoundRobinChain:
        """Chain of equal groups whose product is 1/p (1/p must be a power of group_size)."""
        inv = Fraction(1) / Fraction(p).limit_denominator(1 << 32)
        if inv.denominator != 1:
            raise ValueError("1/p must be an integer")
        inv = inv.numerator
        if inv == 1:
            return cls([1])
        depth = round(math.log(inv, group_size))
        if group_size ** depth != inv:
            return cls([inv])
        return cls([group_size] * depth)

    @property
    def period(self) -> int:
        return math.prod(self.group_sizes)

    @property
    def bucket_count(self) -> int:
        return sum(self.group_sizes)


def round_robin_sample(pkt: Packet, chain: RoundRobinChain) -> bool:
    for i, size in enumerate(chain.group_sizes):
        c = chain.cursors[i]
        chain.cursors[i] = (c + 1) % size
        if c != size - 1:
            return False
    return True


# -- pseudo-byte: geometric routing -------------------------------------------

def geometric_instance_count(m: int = MIN_PACKET_SIZE, M: int = MAX_PACKET_SIZE) -> int:
    return math.ceil(math.log2(M / m))


def geometric_thresholds(m: int = MIN_PACKET_SIZE, M: int = MAX_PACKET_SIZE) -> list[int]:
    """Instance sizes m*2^i for i = 1..R."""
    return [m * 2**i for i in range(1, geometric_instance_count(m, M) + 1)]


def pseudo_byte_route(size: int, *, policy: str = "ceil_log2", m: int = MIN_PACKET_SIZE,
                      M: int = MAX_PACKET_SIZE) -> int:
    """Exponent z of the instance a packet of ``size`` bytes is diverted to.

    The instance's size threshold is 2**z. ``ceil_log2`` uses z = ceil(log2 size);
    ``nearest`` picks the geometric threshold closest to ``size``.
    """
    if not m <= size <= M:
        raise SizeOutOfRange(f"size {size} outside [{m}, {M}]")
    if policy == "ceil_log2":
        return (size - 1).bit_length()
    if policy == "nearest":
        best = min(geometric_thresholds(m, M), key=lambda s: (abs(size - s), s))
        return best.bit_length() - 1
    raise ValueError(f"unknown routing policy {policy!r}")


def instance_probability(z: int, p: float) -> float:
    return min(1.0, p * 2**z)


# -- pseudo-byte: hash comparison ---------------------------------------------

@dataclass(frozen=True)
class ComparisonRule:
    x_value: int
    x_mask: int
    s_value: int
    s_mask: int
    verdict: bool

    def matches(self, x: int, s: int) -> bool:
        return (x & self.x_mask) == self.x_value and (s & self.s_mask) == self.s_value


@dataclass(frozen=True)
class ComparisonRuleset:
    """First-match table deciding ``x < s`` for b-bit unsigned x and s."""

    b: int
    rules: tuple[ComparisonRule, ...]

    def decide(self, x: int, s: int) -> bool:
        for rule in self.rules:
            if rule.matches(x, s):
                return rule.verdict
        raise AssertionError("ruleset has no catch-all")

    def decide_many(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast(x, s).shape, dtype=bool)
        undecided = np.ones_like(out)
        for rule in self.rules:
            hit = undecided & ((x & rule.x_mask) == rule.x_value) & ((s & rule.s_mask) == rule.s_value)
            if rule.verdict:
                out |= hit
            undecided &= ~hit
        return out


def build_comparison_ruleset(b: int) -> ComparisonRuleset:
    """2b+1 rules: walk bits from the most significant; the first position
    where x and s differ decides, and equal values fall through to False."""
    if not 1 <= b <= 32:
        raise ValueError("b must be in [1, 32]")
    rules = []
    for i in reversed(range(b)):
        bit = 1 << i
        rules.append(ComparisonRule(0, bit, bit, bit, True))
        rules.append(ComparisonRule(bit, bit, 0, bit, False))
    rules.append(ComparisonRule(0, 0, 0, 0, False))
    return ComparisonRuleset(b, tuple(rules))


def comparison_width(b: int) -> int:
    """Table width wide enough for a b-bit x and any packet size."""
    return max(b, MAX_PACKET_SIZE.bit_length())


def checksum_prefix(checksum, b: int):
    """The ``b`` most significant bits of the 16-bit checksum."""
    return checksum >> (CHECKSUM_BITS - b)


def hash_compare_sample(pkt: Packet, b: int, r: int,
                        ruleset: ComparisonRuleset | None = None) -> bool:
    """Select when (top b checksum bits XOR r) < size, decided by the rule table."""
    if ruleset is None:
        ruleset = build_comparison_ruleset(comparison_width(b))
    x = checksum_prefix(pkt.checksum, b) ^ r
    return ruleset.decide(x, pkt.size)


def hash_compare_many(checksums: np.ndarray, sizes: np.ndarray, b: int, r: int,
                      ruleset: ComparisonRuleset | None = None) -> np.ndarray:
    if ruleset is None:
        ruleset = build_comparison_ruleset(comparison_width(b))
    return ruleset.decide_many(checksum_prefix(checksums, b) ^ r, sizes)


def rotate_r(b: int, rng: np.random.Generator) -> int:
    if b == 0:
        return 0
    return int(rng.integers(0, 1 << b))


def bits_for(p: float) -> int:
    """b with p == 2**-b exactly."""
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    m, e = math.frexp(p)
    if m != 0.5:
        raise ValueError(f"p={p} is not a power of two")
    return 1 - e


def evasion_window(p: float, rotations_per_s: float) -> float:
    """Seconds a crafted packet stream can expect to evade a rotating hash sampler."""
    return 1.0 / (p * rotations_per_s)


# -- sampler objects held by a switch -----------------------------------------

class _DrawBuffer:
    """Per-packet uniform integers keyed by packet sequence number.

    Blocks are drawn in order, so the draw for a given seq does not depend
    on which other packets were consulted.
    """

    BLOCK = 1 << 16

    def __init__(self, rng: np.random.Generator, high: int):
        self.rng = rng
        self.high = high
        self._arrays: list[np.ndarray] = []
        self._blocks: list[list[int]] = []

    def _fill(self, blk: int):
        while len(self._arrays) <= blk:
            self._arrays.append(self.rng.integers(0, self.high, self.BLOCK))

    def __getitem__(self, seq: int) -> int:
        blk, off = divmod(seq, self.BLOCK)
        blocks = self._blocks
        if len(blocks) <= blk:
            self._fill(blk)
            blocks.extend(a.tolist() for a in self._arrays[len(blocks):])
        return blocks[blk][off]

    def take(self, seqs: np.ndarray) -> np.ndarray:
        seqs = np.asarray(seqs, dtype=np.int64)
        if seqs.size == 0:
            return np.zeros(0, dtype=np.int64)
        lo, hi = int(seqs.min()) // self.BLOCK, int(seqs.max()) // self.BLOCK
        self._fill(hi)
        flat = np.concatenate(self._arrays[lo:hi + 1])
        return flat[seqs - lo * self.BLOCK]


class Sampler:
    """Catch-all sampling stage. ``select`` is called only for packets that
    reached the stage; ``rotate`` returns control bytes sent, if any."""

    name = "base"
    rotating = False

    def select(self, pkt: Packet) -> bool:
        raise NotImplementedError

    def select_many(self, seqs: np.ndarray, sizes: np.ndarray, checksums: np.ndarray) -> np.ndarray:
        """Vectorised ``select`` over packets reaching the stage in order."""
        raise NotImplementedError

    def rotate(self) -> int:
        return 0

    @property
    def table_entries(self) -> int:
        raise NotImplementedError

    @property
    def overhead_bytes(self) -> int:
        return self.table_entries * ENTRY_BYTES


class WeightedSampler(Sampler):
    name = "weighted"

    def __init__(self, p: float, rng: np.random.Generator):
        self.group = WeightedGroup.for_probability(p)
        self._draws = _DrawBuffer(rng, self.group.total)

    def select(self, pkt):
        return self._draws[pkt.seq] < self.group.active_weight

    def select_many(self, seqs, sizes, checksums):
        return self._draws.take(seqs) < self.group.active_weight

    @property
    def table_entries(self):
        return 2


class RoundRobinSampler(Sampler):
    name = "round_robin"

    def __init__(self, p: float, group_size: int = 2):
        self.chain = RoundRobinChain.for_probability(p, group_size)

    def select(self, pkt):
        return round_robin_sample(pkt, self.chain)

    def select_many(self, seqs, sizes, checksums):
        # the cursors form a mixed-radix counter; a packet is picked when it reads period - 1
        chain = self.chain
        pos, scale = 0, 1
        for c, size in zip(chain.cursors, chain.group_sizes):
            pos += c * scale
            scale *= size
        n = len(seqs)
        picked = (pos + np.arange(n)) % chain.period == chain.period - 1
        pos = (pos + n) % chain.period
        for i, size in enumerate(chain.group_sizes):
            pos, chain.cursors[i] = divmod(pos, size)
        return picked

    @property
    def table_entries(self):
        return self.chain.bucket_count


class HashMatchSampler(Sampler):
    name = "hash_match"
    rotating = True

    def __init__(self, p: float, rng: np.random.Generator):
        self.k = bits_for(p)
        self.rng = rng
        self.pattern = rotate_pattern(self.k, rng)

    def select(self, pkt):
        return (pkt.checksum & self.pattern.mask) == self.pattern.value

    def select_many(self, seqs, sizes, checksums):
        return hash_match_many(np.asarray(checksums), self.pattern)

    def rotate(self):
        self.pattern = rotate_pattern(self.k, self.rng)
        return PATTERN_FLOWMOD_BYTES

    @property
    def table_entries(self):
        return 2 * CHECKSUM_BITS


class HashCompareSampler(Sampler):
    name = "hash_compare"
    rotating = True

    def __init__(self, p: float, rng: np.random.Generator):
        self.b = bits_for(p)
        if self.b > CHECKSUM_BITS:
            raise ValueError("hash comparison needs p >= 2**-16")
        self.rng = rng
        self.ruleset = build_comparison_ruleset(comparison_width(self.b))
        self.r = rotate_r(self.b, rng)
        self._cache: dict[tuple[int, int], bool] = {}

    def select(self, pkt):
        x = (pkt.checksum >> (CHECKSUM_BITS - self.b)) ^ self.r
        key = (x, pkt.size)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self.ruleset.decide(x, pkt.size)
        return hit

    def select_many(self, seqs, sizes, checksums):
        return hash_compare_many(np.asarray(checksums), np.asarray(sizes), self.b, self.r, self.ruleset)

    def rotate(self):
        self.r = rotate_r(self.b, self.rng)
        return R_FLOWMOD_BYTES

    @property
    def table_entries(self):
        return len(self.ruleset.rules) + 1


class GeometricSampler(Sampler):
    """Pseudo-byte sampling by routing each packet to a weighted-selection
    instance chosen from its size."""

    name = "geometric"

    def __init__(self, p: float, rng: np.random.Generator, policy: str = "ceil_log2"):
        self.p = p
        self.policy = policy
        self.instances: dict[int, WeightedGroup] = {}
        low = pseudo_byte_route(MIN_PACKET_SIZE, policy=policy)
        high = pseudo_byte_route(MAX_PACKET_SIZE, policy=policy)
        for z in range(low, high + 1):
            self.instances[z] = WeightedGroup.for_probability(instance_probability(z, p))
        self._draws = _DrawBuffer(rng, 1 << 62)
        groups = [self.instances[pseudo_byte_route(s, policy=policy)]
                  for s in range(MIN_PACKET_SIZE, MAX_PACKET_SIZE + 1)]
        self._route_table = (np.array([g.total for g in groups], dtype=np.int64),
                             np.array([g.active_weight for g in groups], dtype=np.int64))

    def probability(self, size: int) -> float:
        return self.instances[pseudo_byte_route(size, policy=self.policy)].probability

    def select(self, pkt):
        g = self.instances[pseudo_byte_route(pkt.size, policy=self.policy)]
        return self._draws[pkt.seq] % g.total < g.active_weight

    def select_many(self, seqs, sizes, checksums):
        sizes = np.asarray(sizes)
        if sizes.size and (sizes.min() < MIN_PACKET_SIZE or sizes.max() > MAX_PACKET_SIZE):
            raise SizeOutOfRange(f"sizes outside [{MIN_PACKET_SIZE}, {MAX_PACKET_SIZE}]")
        totals, active = self._route_table
        idx = sizes - MIN_PACKET_SIZE
        return self._draws.take(seqs) % totals[idx] < active[idx]

    @property
    def table_entries(self):
        # per instance: one group of two buckets plus eight size-match entries
        return 10 * len(self.instances)


SAMPLERS = {
    "weighted": WeightedSampler,
    "round_robin": RoundRobinSampler,
    "hash_match": HashMatchSampler,
    "hash_compare": HashCompareSampler,
    "geometric": GeometricSampler,
}

BYTE_SAMPLERS = {"hash_compare", "geometric"}


def make_sampler(kind: str, p: float, rng: np.random.Generator, **options) -> Sampler:
    if kind not in SAMPLERS:
        raise ValueError(f"unknown sampler {kind!r}; choose from {sorted(SAMPLERS)}")
    if kind == "round_robin":
        return RoundRobinSampler(p, **options)
    return SAMPLERS[kind](p, rng, **options)
