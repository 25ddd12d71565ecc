"""Per-/24 demographics: normalized features, the 10x10x10 cube, registry
grouping, and two-source visibility comparison.

Feature normalization divides the log-transformed value of each block by the
maximum log-transformed value, using log(1+x) so blocks with zero samples or
a single hit stay well-defined. Cube bins are labeled 1..10; bin k covers
((k-1)/10, k/10] and an exact 0 folds into bin 1, so the ten bins partition
[0,1] completely.
"""

from __future__ import annotations

import gzip
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import addrs
from .errors import DataError, IngestError
from .routing import UNROUTED, window_origins

log = logging.getLogger(__name__)

CUBE_BINS = 10


# -- feature normalization -----------------------------------------------------


@dataclass(frozen=True)
class BlockFeatures:
    block: int
    stu: float
    traffic_norm: float
    hosts_norm: float


def _log_normalize(raw: dict[int, int], what: str) -> dict[int, float]:
    peak = max(raw.values())
    if peak <= 0:
        raise DataError(f"cannot normalize {what}: every block has zero {what}")
    denom = math.log1p(peak)
    return {b: math.log1p(v) / denom for b, v in raw.items()}


def normalize_features(
    stu_by_block: dict[int, float],
    traffic_by_block: dict[int, int],
    hosts_by_block: dict[int, int],
) -> list[BlockFeatures]:
    """Join the three per-block measures into normalized feature triples.

    All three inputs must cover exactly the same block set. The block with
    maximal raw traffic gets traffic_norm exactly 1.0, and likewise for the
    distinct-host counts.
    """
    blocks = set(stu_by_block)
    if set(traffic_by_block) != blocks or set(hosts_by_block) != blocks:
        raise DataError("feature inputs cover different block sets")
    if not blocks:
        raise DataError("no blocks to normalize")
    t_norm = _log_normalize(traffic_by_block, "traffic")
    h_norm = _log_normalize(hosts_by_block, "host samples")
    out = []
    for b in sorted(blocks):
        s = stu_by_block[b]
        if not 0.0 <= s <= 1.0:
            raise DataError(f"block {addrs.block_to_str(b)} has utilization {s} outside [0,1]")
        out.append(BlockFeatures(b, s, t_norm[b], h_norm[b]))
    return out


def feature_bin(value: float) -> int:
    """Bin label 1..10 for a feature in [0,1]; 0 folds into bin 1."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"feature value {value} outside [0,1]")
    return max(1, math.ceil(value * CUBE_BINS))


# -- demographics cube ----------------------------------------------------------


@dataclass
class DemographicsCube:
    """Dense 10x10x10 block counts over (utilization, traffic, hosts) bins."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cell(self, stu_bin: int, traffic_bin: int, hosts_bin: int) -> int:
        return int(self.counts[stu_bin - 1, traffic_bin - 1, hosts_bin - 1])

    def flat(self) -> list[int]:
        """All 1000 cells in row-major (stu, traffic, hosts) bin order."""
        return [int(v) for v in self.counts.reshape(-1)]


def build_cube(features: list[BlockFeatures]) -> DemographicsCube:
    counts = np.zeros((CUBE_BINS, CUBE_BINS, CUBE_BINS), np.int64)
    for f in features:
        counts[feature_bin(f.stu) - 1, feature_bin(f.traffic_norm) - 1, feature_bin(f.hosts_norm) - 1] += 1
    cube = DemographicsCube(counts)
    assert cube.total == len(features)
    return cube


# -- delegation table -----------------------------------------------------------


@dataclass(frozen=True)
class DelegationRecord:
    registry: str
    country: str
    start: int
    count: int
    status: str

    @property
    def end(self) -> int:
        return self.start + self.count - 1


class DelegationTable:
    """Disjoint IPv4 address ranges mapped to (registry, country)."""

    def __init__(self, records: list[DelegationRecord]):
        records = sorted(records, key=lambda r: r.start)
        for a, b in zip(records, records[1:]):
            if b.start <= a.end:
                raise DataError(
                    f"overlapping delegations: {addrs.int_to_ip(a.start)}+{a.count} "
                    f"and {addrs.int_to_ip(b.start)}+{b.count}"
                )
        self.records = records
        self._starts = np.array([r.start for r in records], np.uint32)
        self._ends = np.array([r.end for r in records], np.uint32)

    def __len__(self):
        return len(self.records)

    def lookup(self, ip: int) -> DelegationRecord | None:
        i = int(np.searchsorted(self._starts, ip, side="right")) - 1
        if i >= 0 and ip <= int(self._ends[i]):
            return self.records[i]
        return None

    def lookup_block(self, block: int) -> DelegationRecord | None:
        """Delegation covering a /24, looked up by its base address."""
        return self.lookup(block << 8)

    def registry_of(self, ips: np.ndarray) -> list[str | None]:
        idx = np.searchsorted(self._starts, ips, side="right") - 1
        out: list[str | None] = []
        for ip, i in zip(ips, idx):
            if i >= 0 and int(ip) <= int(self._ends[i]):
                out.append(self.records[i].registry)
            else:
                out.append(None)
        return out

    @classmethod
    def load(cls, source) -> "DelegationTable":
        """Parse pipe-separated delegation statistics.

        Expected record layout: registry|cc|ipv4|start|value|date|status[|...].
        Blank lines, comments, version and summary headers, and non-ipv4
        records are skipped; malformed ipv4 records raise.
        """
        if isinstance(source, (str, os.PathLike)):
            opener = gzip.open if str(source).endswith(".gz") else open
            with opener(source, "rt", encoding="utf-8") as f:
                return cls(cls._parse(f))
        return cls(cls._parse(source))

    @staticmethod
    def _parse(lines) -> list[DelegationRecord]:
        records = []
        for n, raw in enumerate(lines, 1):
            line = raw.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) < 3 or parts[2] != "ipv4":
                continue
            if len(parts) >= 6 and parts[5] == "summary":
                continue
            if len(parts) < 7:
                raise IngestError(f"short ipv4 delegation record {line!r}", line=n)
            try:
                start = addrs.ip_to_int(parts[3])
                count = int(parts[4])
            except (DataError, ValueError):
                raise IngestError(f"bad ipv4 delegation record {line!r}", line=n) from None
            if count < 1:
                raise IngestError(f"non-positive address count in {line!r}", line=n)
            if start + count - 1 > 0xFFFFFFFF:
                raise IngestError(f"delegation {line!r} runs past the address space", line=n)
            records.append(DelegationRecord(parts[0], parts[1], start, count, parts[6]))
        return records


# -- registry grouping ----------------------------------------------------------


@dataclass
class RegistryAggregate:
    """One registry's share of the feature population.

    plane_counts is the 10x10 (utilization bin, traffic bin) projection of the
    cube; plane_hosts_mean carries the mean normalized host count of the
    blocks in each plane cell, NaN where the cell is empty.
    """

    key: str
    blocks: int
    plane_counts: np.ndarray
    plane_hosts_mean: np.ndarray


def group_by_registry(
    features: list[BlockFeatures],
    table: DelegationTable,
    *,
    key: str = "registry",
) -> dict[str, RegistryAggregate]:
    """Split the feature population by delegation registry or country.

    Blocks outside every delegated range group under "unassigned". The group
    sizes always sum to the feature count.
    """
    if key not in ("registry", "country"):
        raise ValueError(f"unknown grouping key {key!r}")
    groups: dict[str, list[BlockFeatures]] = {}
    for f in features:
        rec = table.lookup_block(f.block)
        name = "unassigned" if rec is None else getattr(rec, key)
        groups.setdefault(name, []).append(f)
    out = {}
    for name in sorted(groups):
        members = groups[name]
        counts = np.zeros((CUBE_BINS, CUBE_BINS), np.int64)
        sums = np.zeros((CUBE_BINS, CUBE_BINS), np.float64)
        for f in members:
            i, j = feature_bin(f.stu) - 1, feature_bin(f.traffic_norm) - 1
            counts[i, j] += 1
            sums[i, j] += f.hosts_norm
        with np.errstate(invalid="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        out[name] = RegistryAggregate(name, len(members), counts, means)
    assert sum(g.blocks for g in out.values()) == len(features)
    return out


# -- visibility comparison -------------------------------------------------------


def _as_keys(ips: np.ndarray, snapshots, lo: int, hi: int) -> np.ndarray:
    origins = window_origins(ips, snapshots, lo, hi)
    return np.unique(origins[origins != UNROUTED])


def compare_sources(
    set_a,
    set_b,
    granularity: str = "ip",
    *,
    snapshots=None,
    window: tuple[int, int] | None = None,
) -> tuple[int, int, int]:
    """Three-way visibility split between two address sets.

    At "ip" the split is over addresses; at "slash24" and "as" a unit counts
    as seen by a source when at least one of its addresses is in that
    source's set. Addresses that no snapshot routes are dropped from the
    "as" comparison.
    """
    a = np.unique(np.asarray(list(set_a) if isinstance(set_a, (set, frozenset)) else set_a, np.uint32))
    b = np.unique(np.asarray(list(set_b) if isinstance(set_b, (set, frozenset)) else set_b, np.uint32))
    if granularity == "ip":
        pass
    elif granularity == "slash24":
        a, b = np.unique(a >> 8), np.unique(b >> 8)
    elif granularity == "as":
        if not snapshots:
            raise DataError("AS-level comparison needs routing snapshots")
        if window is None:
            raise DataError("AS-level comparison needs a day window")
        lo, hi = window
        a = _as_keys(a, snapshots, lo, hi)
        b = _as_keys(b, snapshots, lo, hi)
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    both = np.intersect1d(a, b, assume_unique=True).size
    return a.size - both, both, b.size - both
