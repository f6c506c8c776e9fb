"""Exact per-flow counts: the reference every estimate is scored against."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import FlowKey, Trace, US_PER_S


@dataclass
class Truth:
    end_us: int
    total: int
    counts: dict[FlowKey, int]
    heavy: set[FlowKey]


def ground_truth(trace: Trace, T: float, end_s: float, start_s: float = 0.0,
                 by_bytes: bool = False) -> Truth:
    """Exact counts of packets (or bytes) with start <= time < end and the
    flows holding at least T of them."""
    start_us = int(round(start_s * US_PER_S))
    end_us = int(round(end_s * US_PER_S))
    lo = int(np.searchsorted(trace.times_us, start_us, side="left"))
    hi = int(np.searchsorted(trace.times_us, end_us, side="left"))
    weights = trace.sizes[lo:hi] if by_bytes else None
    bins = np.bincount(trace.flows[lo:hi], weights=weights, minlength=len(trace.keys))
    bins = bins.astype(np.int64)
    total = int(bins.sum())
    nz = np.flatnonzero(bins)
    counts = {trace.keys[i]: int(bins[i]) for i in nz.tolist()}
    bar = T * total
    heavy = {trace.keys[i] for i in nz.tolist() if bins[i] >= bar and total > 0}
    return Truth(end_us, total, counts, heavy)


def interval_truths(trace: Trace, T: float, interval_len: float, interval_count: int) -> list[Truth]:
    """Cumulative truth at the end of each reporting interval."""
    return [ground_truth(trace, T, interval_len * (k + 1)) for k in range(interval_count)]
