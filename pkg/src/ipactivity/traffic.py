"""Traffic statistics: activity bins, consolidation trend, relative host counts.

Addresses are binned by how many days they were active; each address also
carries the median of its daily hit counts, taken over active days only.
Percentile summaries use the nearest-rank method throughout (the p-th
percentile of n sorted values is the element at index ceil(p*n) - 1), which
keeps every reported number an actual observed value and makes output
bit-reproducible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .store import ActivityStore, UASampleSet

log = logging.getLogger(__name__)

PERCENTILES = (5, 25, 50, 75, 95)
U64_MAX = np.iinfo(np.uint64).max

DENSITY_MIN_SAMPLES = 100
DENSITY_BOT_RATIO = 0.01
DENSITY_GATEWAY_RATIO = 0.2


def nearest_rank(sorted_values: np.ndarray, pct: float):
    """Nearest-rank percentile of an ascending array."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of empty data")
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


@dataclass
class DaysActiveBins:
    days: int
    stat: str
    counts: np.ndarray  # (T+1,) addresses per bin; bin = days active, 0 unused
    total_hits: np.ndarray  # (T+1,) uint64
    percentiles: np.ndarray  # (T+1, 5) of per-address daily-hit stats, NaN when empty
    total_addresses: int
    grand_total_hits: int


def bin_by_days_active(store: ActivityStore, stat: str = "median") -> DaysActiveBins:
    """Bin every active address by its active-day count.

    Each address contributes its per-day hit summary (median over active days
    by default, mean behind the flag) to its bin's percentile statistics, and
    its full hit total to the bin's traffic sum.
    """
    if stat not in ("median", "mean"):
        raise ValueError(f"unknown stat {stat!r}")
    t = store.day_range.days
    counts = np.zeros(t + 1, np.int64)
    totals = np.zeros(t + 1, np.uint64)
    bin_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for m in store:
        active_days = np.count_nonzero(m.active, axis=1)
        rows = np.flatnonzero(active_days)
        if rows.size == 0:
            continue
        k = active_days[rows]
        row_totals = m.hits.sum(axis=1, dtype=np.uint64)[rows]
        if stat == "median":
            ordered = np.sort(m.hits[rows], axis=1)
            # Active-day hits occupy the tail after the zero entries; the
            # nearest-rank median of k values sits (k-1)//2 into that tail.
            idx = t - k + (k - 1) // 2
            values = ordered[np.arange(rows.size), idx].astype(np.float64)
        else:
            values = row_totals / k
        counts += np.bincount(k, minlength=t + 1)
        np.add.at(totals, k, row_totals)
        bin_parts.append(k)
        val_parts.append(values)

    pct = np.full((t + 1, len(PERCENTILES)), np.nan)
    total_addresses = int(counts.sum())
    if total_addresses:
        bins = np.concatenate(bin_parts)
        vals = np.concatenate(val_parts)
        order = np.lexsort((vals, bins))
        bins = bins[order]
        vals = vals[order]
        starts = np.concatenate(([0], np.flatnonzero(np.diff(bins)) + 1, [bins.size]))
        for s, e in zip(starts[:-1], starts[1:]):
            seg = vals[s:e]
            row = int(bins[s])
            for j, p in enumerate(PERCENTILES):
                pct[row, j] = nearest_rank(seg, p)
    return DaysActiveBins(
        days=t,
        stat=stat,
        counts=counts,
        total_hits=totals,
        percentiles=pct,
        total_addresses=total_addresses,
        grand_total_hits=int(totals.sum(dtype=np.uint64)),
    )


def cumulative_shares(bins: DaysActiveBins) -> list[tuple[int, float, float]]:
    """Per-bin cumulative (address fraction, traffic fraction), bins 1..T."""
    if bins.total_addresses == 0:
        raise DataError("no active addresses to accumulate")
    out = []
    cum_addr = 0
    cum_hits = 0
    for b in range(1, bins.days + 1):
        cum_addr += int(bins.counts[b])
        cum_hits += int(bins.total_hits[b])
        out.append((b, cum_addr / bins.total_addresses, cum_hits / bins.grand_total_hits))
    return out


def top_decile_share(store: ActivityStore, windows) -> list[float]:
    """Traffic share of the top tenth of addresses, one value per window.

    Ranking is by total window hits, ties broken by descending hits then
    ascending address, and the decile size is ceil(N/10) over the addresses
    active in that window.
    """
    out = []
    for lo, hi in windows:
        store.day_range.check_window(lo, hi)
        addr_parts = []
        hit_parts = []
        for m in store:
            totals = m.hits[:, lo : hi + 1].sum(axis=1, dtype=np.uint64)
            rows = np.flatnonzero(totals)
            if rows.size:
                addr_parts.append((m.block << 8) + rows.astype(np.uint32))
                hit_parts.append(totals[rows])
        if not addr_parts:
            raise DataError(f"no active address in window {lo}..{hi}")
        addrs_w = np.concatenate(addr_parts)
        hits_w = np.concatenate(hit_parts)
        k = -(-addrs_w.size // 10)
        order = np.lexsort((addrs_w, U64_MAX - hits_w))
        top = order[:k]
        share = int(hits_w[top].sum(dtype=np.uint64)) / int(hits_w.sum(dtype=np.uint64))
        out.append(share)
    return out


@dataclass
class HostDensityRecord:
    block: int
    sample_count: int
    distinct_ua: int


def host_density(
    store: ActivityStore,
    samples: UASampleSet,
    lo: int | None = None,
    hi: int | None = None,
) -> list[HostDensityRecord]:
    """UA sample volume and distinct-string count per active /24."""
    if lo is None:
        lo = 0
    if hi is None:
        hi = store.day_range.days - 1
    records = []
    active = set(int(b) for b in store.active_block_ids(lo, hi))
    for block in sorted(active):
        n, distinct = samples.window_counts(block, lo, hi)
        records.append(HostDensityRecord(block, n, distinct))
    stray = [b for b in samples.block_ids() if b not in active]
    if stray:
        log.debug("%d blocks have UA samples but no activity in the window", len(stray))
    return records


def classify_density_region(record: HostDensityRecord, *, min_samples: int = DENSITY_MIN_SAMPLES) -> str:
    """Coarse region of a host-density record.

    With enough samples, a block whose distinct-string count is a tiny share
    of its sample count (ratio <= 0.01) looks like a single automated client
    ("bot"); one with a large share (ratio >= 0.2) looks like many distinct
    hosts behind one block ("gateway"). Everything else is "other".
    """
    if record.sample_count < min_samples:
        return "other"
    ratio = record.distinct_ua / record.sample_count
    if ratio <= DENSITY_BOT_RATIO:
        return "bot"
    if ratio >= DENSITY_GATEWAY_RATIO:
        return "gateway"
    return "other"
