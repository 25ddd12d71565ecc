"""Daily routing snapshots and address-to-AS mapping.

A snapshot is one day's routing table as `<prefix>/<len>,<asn>` lines. Lookup
is longest-prefix match. Mapping an address over a multi-day window takes a
strict majority vote across the days, breaking ties toward the latest day,
so the result is deterministic regardless of input order.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import addrs
from .errors import DataError, IngestError
from .store import DayRange, EPOCH_ORDINAL, parse_day

log = logging.getLogger(__name__)

UNROUTED = -1  # internal code; public lookups return None

BGP_CLASSES = ("no_change", "origin_change", "announce", "withdraw", "unmapped")


class RoutingSnapshot:
    """One day's routing table with longest-prefix-match lookup."""

    def __init__(self, day: int):
        self.day = day
        self._by_len: list[dict[int, int] | None] = [None] * 33
        self.n_routes = 0
        self.conflicts = 0
        self._intervals: tuple[np.ndarray, np.ndarray] | None = None

    def add_route(self, base: int, plen: int, asn: int):
        table = self._by_len[plen]
        if table is None:
            table = self._by_len[plen] = {}
        old = table.get(base)
        if old is None:
            table[base] = asn
            self.n_routes += 1
        elif old != asn:
            # Conflicting duplicate rows: keep the lexicographically smallest
            # AS number so reloads are order-independent, and count it.
            table[base] = min(old, asn, key=str)
            self.conflicts += 1
        self._intervals = None

    def lookup(self, ip: int) -> int | None:
        for plen in range(32, -1, -1):
            table = self._by_len[plen]
            if table is None:
                continue
            base = ip & ~((1 << (32 - plen)) - 1) & 0xFFFFFFFF if plen < 32 else ip
            asn = table.get(base)
            if asn is not None:
                return asn
        return None

    def intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten the table into disjoint half-open intervals.

        Returns (bounds, origins): bounds is ascending uint64 starting at 0,
        origins[i] applies to [bounds[i], bounds[i+1]) with -1 for unrouted.
        Used for vectorized window mapping; equivalent to lookup() per address.
        """
        if self._intervals is None:
            points = {0, 1 << 32}
            for plen in range(33):
                table = self._by_len[plen]
                if not table:
                    continue
                span = 1 << (32 - plen)
                for base in table:
                    points.add(base)
                    points.add(base + span)
            bounds = np.array(sorted(p for p in points if p <= 1 << 32), np.uint64)[:-1]
            origins = np.fromiter(
                (UNROUTED if (v := self.lookup(int(b))) is None else v for b in bounds),
                np.int64,
                bounds.size,
            )
            self._intervals = (bounds, origins)
        return self._intervals

    def origins_for(self, ips: np.ndarray) -> np.ndarray:
        bounds, origins = self.intervals()
        idx = np.searchsorted(bounds, ips.astype(np.uint64), side="right") - 1
        return origins[idx]

    def fingerprint(self) -> bytes:
        bounds, origins = self.intervals()
        return bounds.tobytes() + origins.tobytes()

    @classmethod
    def from_lines(cls, lines, day: int, source: str = "<snapshot>") -> "RoutingSnapshot":
        snap = cls(day)
        for n, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line:
                continue
            prefix_text, sep, asn_text = line.partition(",")
            if not sep or not asn_text.isdigit():
                raise IngestError(f"{source}: bad route {line!r}", line=n)
            try:
                base, plen = addrs.parse_prefix(prefix_text)
            except DataError as exc:
                raise IngestError(f"{source}: {exc}", line=n) from None
            snap.add_route(base, plen, int(asn_text))
        return snap


def load_snapshot_dir(path, day_range: DayRange) -> list[RoutingSnapshot]:
    """Load every ISO-date-named snapshot file inside the observation period.

    Files dated outside the period are skipped; two files for the same day
    are an error. Returns snapshots sorted by day.
    """
    path = os.fspath(path)
    if not os.path.isdir(path):
        raise DataError(f"{path}: not a directory of routing snapshots")
    seen: dict[int, str] = {}
    out = []
    for name in sorted(os.listdir(path)):
        if name.startswith("."):
            continue
        stem = name.split(".", 1)[0]
        try:
            day = parse_day(stem)
        except DataError:
            log.warning("ignoring %s: name is not an ISO date", name)
            continue
        epoch = day.toordinal() - EPOCH_ORDINAL
        if not day_range.first_epoch <= epoch <= day_range.last_epoch:
            log.debug("ignoring %s: outside the observation period", name)
            continue
        idx = epoch - day_range.first_epoch
        if idx in seen:
            raise DataError(f"{path}: duplicate snapshot for {stem} ({seen[idx]} and {name})")
        seen[idx] = name
        full = os.path.join(path, name)
        with open(full, "r", encoding="utf-8") as f:
            out.append(RoutingSnapshot.from_lines(f, idx, source=name))
    out.sort(key=lambda s: s.day)
    return out


def _window_snapshots(snapshots, lo: int, hi: int) -> list[RoutingSnapshot]:
    sel = [s for s in snapshots if lo <= s.day <= hi]
    if not sel:
        raise DataError(f"no routing snapshot covers days {lo}..{hi}")
    return sel


def ip_to_as(ip: int, snapshots, lo: int, hi: int) -> int | None:
    """Majority origin AS of one address over days lo..hi, None if unrouted."""
    sel = _window_snapshots(snapshots, lo, hi)
    count: dict[int, int] = {}
    last: dict[int, int] = {}
    for snap in sel:
        asn = snap.lookup(ip)
        key = UNROUTED if asn is None else asn
        count[key] = count.get(key, 0) + 1
        last[key] = snap.day
    best = max(count, key=lambda v: (count[v], last[v]))
    return None if best == UNROUTED else best


def window_origins(ips: np.ndarray, snapshots, lo: int, hi: int) -> np.ndarray:
    """Vectorized ip_to_as over an address array; -1 marks unrouted."""
    sel = _window_snapshots(snapshots, lo, hi)
    groups: dict[bytes, list[RoutingSnapshot]] = {}
    for snap in sel:
        groups.setdefault(snap.fingerprint(), []).append(snap)
    if ips.size == 0:
        return np.empty(0, np.int64)
    tables = list(groups.values())
    if len(tables) == 1:
        return tables[0][0].origins_for(ips)
    cand = np.stack([t[0].origins_for(ips) for t in tables], axis=1)
    weights = [len(t) for t in tables]
    lasts = [max(s.day for s in t) for t in tables]
    k = len(tables)
    # Deterministic lexicographic (vote count, latest day) preference, packed
    # into one integer score. Distinct origins never tie: the snapshot groups
    # partition the days, so their latest days differ.
    weight = np.zeros(cand.shape, np.int64)
    last = np.zeros(cand.shape, np.int64)
    for j in range(k):
        for m in range(k):
            eq = cand[:, m] == cand[:, j]
            weight[:, j] += np.where(eq, weights[m], 0)
            np.maximum(last[:, j], np.where(eq, lasts[m] + 1, 0), out=last[:, j])
    score = weight * (1 << 32) + last
    pick = np.argmax(score, axis=1)
    return cand[np.arange(cand.shape[0]), pick]


def classify_pair(before: int | None, after: int | None) -> str:
    if before is None and after is None:
        return "unmapped"
    if before is None:
        return "announce"
    if after is None:
        return "withdraw"
    return "no_change" if before == after else "origin_change"


def classify_bgp(ip: int, snapshots, window_before, window_after) -> str:
    """BGP transition class of one address between two day windows."""
    before = ip_to_as(ip, snapshots, *window_before)
    after = ip_to_as(ip, snapshots, *window_after)
    return classify_pair(before, after)


def classify_many(ips: np.ndarray, snapshots, window_before, window_after) -> list[str]:
    """Vectorized classify_bgp over an address array."""
    before = window_origins(ips, snapshots, *window_before)
    after = window_origins(ips, snapshots, *window_after)
    out = np.where(
        (before == UNROUTED) & (after == UNROUTED),
        4,
        np.where(
            before == UNROUTED,
            2,
            np.where(after == UNROUTED, 3, np.where(before == after, 0, 1)),
        ),
    )
    return [BGP_CLASSES[i] for i in out]
