"""Windowed churn analysis over the activity store.

The observation period is partitioned into non-overlapping windows of w days
(a trailing partial window is dropped). An address active at least once in a
window belongs to that window's set W_i. Between consecutive windows an
address produces an up event (absent, then present) or a down event (present,
then absent). Percentages are normalized so that

    up_pct(i)   = 100 * |W_{i+1} \\ W_i| / |W_{i+1}|
    down_pct(i) = 100 * |W_i \\ W_{i+1}| / |W_i|

which makes the two symmetric under time reversal. An empty denominator
yields 0.0 rather than an error: no members, no churn.

Every event also gets a prefix-mask size tag: the smallest mask m such that
all addresses sharing the event's mask-m prefix either have a same-kind event
at the same boundary or are inactive in both windows. A same-kind event at
address x means exactly that x is absent from the reference window (W_i for
up, W_{i+1} for down), and inactive-in-both implies the same, so the
condition reduces to: the mask-m prefix contains no address active in the
reference window. That makes the condition monotone in m, and the descending
walk from /32 that stops at the first failure returns the true minimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import routing
from .errors import DataError
from .store import ActivityStore, BLOCK_SIZE

log = logging.getLogger(__name__)

DEFAULT_MASK_FLOOR = 8
DEFAULT_MIN_ACTIVES = 1000


@dataclass(frozen=True)
class WindowSpec:
    """Non-overlapping w-day windows tiling a prefix of the period."""

    size_days: int
    windows: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.windows)


def make_windows(total_days: int, size_days: int) -> WindowSpec:
    if size_days < 1:
        raise ValueError("window size must be at least one day")
    if size_days > total_days:
        raise ValueError(f"window size {size_days} exceeds the {total_days}-day period")
    count = total_days // size_days
    windows = tuple((i * size_days, (i + 1) * size_days - 1) for i in range(count))
    return WindowSpec(size_days, windows)


@dataclass
class UpDownEvent:
    address: int
    kind: str  # "up" | "down"
    window_index: int  # event observed between windows i and i+1
    tagged_mask: int | None = None
    bgp_class: str | None = None


@dataclass
class BoundaryCounts:
    boundary: int
    up_count: int
    down_count: int
    size_before: int
    size_after: int
    up_pct: float
    down_pct: float


@dataclass
class ChurnStats:
    window_size: int
    boundaries: list[BoundaryCounts]
    summary: dict[str, dict[str, float]] = field(default_factory=dict)

    def finalize(self):
        ups = [b.up_pct for b in self.boundaries]
        downs = [b.down_pct for b in self.boundaries]
        self.summary = {
            "up_pct": {"min": min(ups), "median": _median(ups), "max": max(ups)},
            "down_pct": {"min": min(downs), "median": _median(downs), "max": max(downs)},
        }
        return self


def _median(values) -> float:
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        raise ValueError("median of empty sequence")
    mid = n // 2
    if n % 2:
        return float(vals[mid])
    return (vals[mid - 1] + vals[mid]) / 2.0


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


class _WindowView:
    """Per-block window activity for one WindowSpec, computed once."""

    def __init__(self, store: ActivityStore, spec: WindowSpec):
        if len(spec.windows) < 2:
            raise DataError("need at least 2 windows to have a boundary")
        self.store = store
        self.spec = spec
        self.blocks: list[int] = []
        self.union: list[np.ndarray] = []  # (256, n_windows) bool per block
        for m in store:
            self.blocks.append(m.block)
            self.union.append(m.window_union(spec.windows))
        self.sizes = np.zeros(len(spec.windows), np.int64)
        for u in self.union:
            self.sizes += np.count_nonzero(u, axis=0)

    def boundary_events(self, i: int):
        """(up_addresses, down_addresses) at boundary i, both sorted."""
        ups = []
        downs = []
        for block, u in zip(self.blocks, self.union):
            before = u[:, i]
            after = u[:, i + 1]
            up_rows = np.flatnonzero(~before & after)
            down_rows = np.flatnonzero(before & ~after)
            if up_rows.size:
                ups.append((block << 8) + up_rows.astype(np.uint32))
            if down_rows.size:
                downs.append((block << 8) + down_rows.astype(np.uint32))
        up = np.concatenate(ups) if ups else np.empty(0, np.uint32)
        down = np.concatenate(downs) if downs else np.empty(0, np.uint32)
        return up, down

    def window_members(self, i: int) -> np.ndarray:
        parts = []
        for block, u in zip(self.blocks, self.union):
            rows = np.flatnonzero(u[:, i])
            if rows.size:
                parts.append((block << 8) + rows.astype(np.uint32))
        return np.concatenate(parts) if parts else np.empty(0, np.uint32)

    def reference_actives(self, i: int):
        """Per-block activity vectors of window i plus the sorted block list.

        This is what mask tagging needs: which addresses are active in the
        reference window, and which whole blocks hold any of them.
        """
        vecs: dict[int, np.ndarray] = {}
        active_blocks = []
        for block, u in zip(self.blocks, self.union):
            col = u[:, i]
            if col.any():
                vecs[block] = col
                active_blocks.append(block)
        return vecs, np.asarray(active_blocks, np.uint32)


def churn_stats(store: ActivityStore, spec: WindowSpec) -> ChurnStats:
    """Boundary-by-boundary churn counts without materializing events."""
    view = _WindowView(store, spec)
    return _stats_from_view(view)


def _stats_from_view(view: _WindowView) -> ChurnStats:
    boundaries = []
    n = len(view.spec.windows)
    for i in range(n - 1):
        up = down = 0
        for u in view.union:
            before = u[:, i]
            after = u[:, i + 1]
            up += int(np.count_nonzero(~before & after))
            down += int(np.count_nonzero(before & ~after))
        size_before = int(view.sizes[i])
        size_after = int(view.sizes[i + 1])
        boundaries.append(
            BoundaryCounts(
                boundary=i,
                up_count=up,
                down_count=down,
                size_before=size_before,
                size_after=size_after,
                up_pct=_pct(up, size_after),
                down_pct=_pct(down, size_before),
            )
        )
    return ChurnStats(view.spec.size_days, boundaries).finalize()


def detect_events(store: ActivityStore, spec: WindowSpec):
    """Enumerate every up/down event plus per-boundary statistics.

    Returns (events, stats). Events are ordered by boundary, kind (up before
    down), then ascending address.
    """
    view = _WindowView(store, spec)
    events: list[UpDownEvent] = []
    boundaries = []
    for i in range(len(spec.windows) - 1):
        up, down = view.boundary_events(i)
        events.extend(UpDownEvent(int(a), "up", i) for a in up)
        events.extend(UpDownEvent(int(a), "down", i) for a in down)
        size_before = int(view.sizes[i])
        size_after = int(view.sizes[i + 1])
        boundaries.append(
            BoundaryCounts(
                boundary=i,
                up_count=int(up.size),
                down_count=int(down.size),
                size_before=size_before,
                size_after=size_after,
                up_pct=_pct(up.size, size_after),
                down_pct=_pct(down.size, size_before),
            )
        )
    stats = ChurnStats(spec.size_days, boundaries).finalize()
    return events, stats


# -- prefix-mask event-size tagging -------------------------------------------


class _MaskTagger:
    """Tags events at one boundary for one kind against a reference window.

    Levels 31..24 are answered from a per-block any-active pyramid; coarser
    masks reduce to an emptiness query over the sorted list of blocks that
    hold any reference activity.
    """

    def __init__(self, vecs: dict[int, np.ndarray], active_blocks: np.ndarray, mask_floor: int):
        self.mask_floor = mask_floor
        self.active_blocks = active_blocks
        self._pyramids: dict[int, list[np.ndarray]] = {}
        self._vecs = vecs

    def _pyramid(self, block: int) -> list[np.ndarray]:
        levels = self._pyramids.get(block)
        if levels is None:
            v = self._vecs.get(block)
            if v is None:
                v = np.zeros(BLOCK_SIZE, bool)
            levels = [v]
            for _ in range(8):
                v = v.reshape(-1, 2).any(axis=1)
                levels.append(v)
            self._pyramids[block] = levels
        return levels

    def tag(self, address: int) -> int:
        block = address >> 8
        row = address & 0xFF
        levels = self._pyramid(block)
        best = 32
        for m in range(31, max(self.mask_floor, 24) - 1, -1):
            width = 32 - m
            if levels[width][row >> width]:
                return best
            best = m
        if self.mask_floor >= 24:
            return best
        for m in range(23, self.mask_floor - 1, -1):
            width = 24 - m
            g = block >> width
            lo = np.uint32(g << width)
            hi = np.uint32((g + 1) << width) if (g + 1) << width <= 0xFFFFFF else None
            i0 = np.searchsorted(self.active_blocks, lo, side="left")
            i1 = (
                np.searchsorted(self.active_blocks, hi, side="left")
                if hi is not None
                else self.active_blocks.size
            )
            if i0 != i1:
                return best
            best = m
        return best


def tag_event_mask(
    event: UpDownEvent,
    store: ActivityStore,
    spec: WindowSpec,
    mask_floor: int = DEFAULT_MASK_FLOOR,
) -> int:
    """Smallest prefix mask whose addresses all share the event's behavior."""
    _check_floor(mask_floor)
    view = _WindowView(store, spec)
    ref = event.window_index if event.kind == "up" else event.window_index + 1
    vecs, active_blocks = view.reference_actives(ref)
    return _MaskTagger(vecs, active_blocks, mask_floor).tag(event.address)


def tag_events(
    events: list[UpDownEvent],
    store: ActivityStore,
    spec: WindowSpec,
    mask_floor: int = DEFAULT_MASK_FLOOR,
) -> None:
    """Fill tagged_mask on every event, grouping work per boundary and kind."""
    _check_floor(mask_floor)
    view = _WindowView(store, spec)
    taggers: dict[int, _MaskTagger] = {}
    for e in events:
        ref = e.window_index if e.kind == "up" else e.window_index + 1
        tagger = taggers.get(ref)
        if tagger is None:
            vecs, active_blocks = view.reference_actives(ref)
            tagger = taggers[ref] = _MaskTagger(vecs, active_blocks, mask_floor)
        e.tagged_mask = tagger.tag(e.address)


def _check_floor(mask_floor: int):
    if not 0 <= mask_floor <= 32:
        raise ValueError("mask floor must be between 0 and 32")


def mask_histogram(events) -> list[tuple[str, int, float]]:
    """Event-size distribution over mask buckets.

    /32 and /31 share one bucket; every coarser mask down to the smallest
    tagged value gets its own. Returns (label, count, fraction) rows ordered
    finest to coarsest; empty input yields an empty histogram.
    """
    events = list(events)
    if not events:
        return []
    counts: dict[int, int] = {}
    floor = 31
    for e in events:
        if e.tagged_mask is None:
            raise ValueError("events must be mask-tagged first")
        key = min(e.tagged_mask, 31)
        floor = min(floor, key)
        counts[key] = counts.get(key, 0) + 1
    total = len(events)
    out = [(">=31", counts.get(31, 0), counts.get(31, 0) / total)]
    for m in range(30, floor - 1, -1):
        c = counts.get(m, 0)
        out.append((str(m), c, c / total))
    return out


# -- long-horizon appear/disappear accounting ---------------------------------


@dataclass
class WindowDiff:
    window_index: int
    appear: int
    disappear: int
    appear_whole_block_frac: float | None
    disappear_whole_block_frac: float | None
    appear_bgp: dict[str, float] | None = None
    disappear_bgp: dict[str, float] | None = None


def long_term_diff(store: ActivityStore, spec: WindowSpec, snapshots=None) -> list[WindowDiff]:
    """Appear/disappear counts of every window against the first window.

    appear = |W_k \\ W_0| and disappear = |W_0 \\ W_k|. Each side also reports
    what fraction of its addresses sit in a /24 that appeared or disappeared
    wholesale, i.e. whose containing block has no activity at all in the
    other window. With routing snapshots, adds the BGP class breakdown of the
    affected addresses between window 0 and window k.
    """
    view = _WindowView(store, spec)
    out = []
    w0 = {b: u[:, 0] for b, u in zip(view.blocks, view.union)}
    for k in range(1, len(spec.windows)):
        appear_parts = []
        disappear_parts = []
        appear_whole = 0
        disappear_whole = 0
        for block, u in zip(view.blocks, view.union):
            before = w0[block]
            after = u[:, k]
            up_rows = np.flatnonzero(~before & after)
            down_rows = np.flatnonzero(before & ~after)
            if up_rows.size:
                appear_parts.append((block << 8) + up_rows.astype(np.uint32))
                if not before.any():
                    appear_whole += int(up_rows.size)
            if down_rows.size:
                disappear_parts.append((block << 8) + down_rows.astype(np.uint32))
                if not after.any():
                    disappear_whole += int(down_rows.size)
        appear = np.concatenate(appear_parts) if appear_parts else np.empty(0, np.uint32)
        disappear = (
            np.concatenate(disappear_parts) if disappear_parts else np.empty(0, np.uint32)
        )
        diff = WindowDiff(
            window_index=k,
            appear=int(appear.size),
            disappear=int(disappear.size),
            appear_whole_block_frac=appear_whole / appear.size if appear.size else None,
            disappear_whole_block_frac=disappear_whole / disappear.size if disappear.size else None,
        )
        if snapshots is not None:
            w_first = spec.windows[0]
            w_k = spec.windows[k]
            diff.appear_bgp = _class_fractions(
                routing.classify_many(appear, snapshots, w_first, w_k)
            )
            diff.disappear_bgp = _class_fractions(
                routing.classify_many(disappear, snapshots, w_first, w_k)
            )
        out.append(diff)
    return out


def _class_fractions(classes: list[str]) -> dict[str, float]:
    total = len(classes)
    out = {}
    for name in routing.BGP_CLASSES:
        c = classes.count(name)
        out[name] = c / total if total else 0.0
    return out


# -- per-AS churn --------------------------------------------------------------


@dataclass
class AsChurnRow:
    asn: int
    active_addrs: int
    up_median_pct: float
    down_median_pct: float


@dataclass
class PerAsChurn:
    rows: list[AsChurnRow]
    up_cdf: list[tuple[float, float]]
    down_cdf: list[tuple[float, float]]


def per_as_churn(
    store: ActivityStore,
    spec: WindowSpec,
    snapshots,
    *,
    min_actives: int = DEFAULT_MIN_ACTIVES,
    mapping: str = "per-window",
) -> PerAsChurn:
    """Per-AS median churn percentages over eligible ASes.

    An AS is eligible when strictly more than min_actives distinct addresses
    active during the period map to it under the period-wide majority
    mapping. Boundary percentages use either a per-window majority mapping
    (default) or the period-wide one, then each AS's boundary percentages
    are summarized by their median. CDFs run over the per-AS medians.
    """
    if mapping not in ("per-window", "period"):
        raise ValueError(f"unknown mapping {mapping!r}")
    view = _WindowView(store, spec)
    full = (0, store.day_range.days - 1)
    universe = store.active_set()
    period_origin = routing.window_origins(universe, snapshots, *full)
    routed = period_origin != routing.UNROUTED
    asns, counts = np.unique(period_origin[routed], return_counts=True)
    eligible = set(int(a) for a, c in zip(asns, counts) if c > min_actives)
    if not eligible:
        return PerAsChurn([], [], [])

    n_bound = len(spec.windows) - 1
    up_pcts: dict[int, list[float]] = {a: [] for a in eligible}
    down_pcts: dict[int, list[float]] = {a: [] for a in eligible}

    member_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def members_with_origin(i: int):
        got = member_cache.get(i)
        if got is None:
            addrs_i = view.window_members(i)
            if mapping == "per-window":
                origins = routing.window_origins(addrs_i, snapshots, *spec.windows[i])
            else:
                origins = routing.window_origins(addrs_i, snapshots, *full)
            got = member_cache[i] = (addrs_i, origins)
        return got

    for i in range(n_bound):
        up, down = view.boundary_events(i)
        before_addrs, before_origins = members_with_origin(i)
        after_addrs, after_origins = members_with_origin(i + 1)
        # Events take the AS of the window they are measured against: ups
        # the arriving window, downs the departing one.
        up_origins = after_origins[np.searchsorted(after_addrs, up)] if up.size else np.empty(0, np.int64)
        down_origins = (
            before_origins[np.searchsorted(before_addrs, down)] if down.size else np.empty(0, np.int64)
        )
        for asn in eligible:
            n_after = int(np.count_nonzero(after_origins == asn))
            n_before = int(np.count_nonzero(before_origins == asn))
            n_up = int(np.count_nonzero(up_origins == asn))
            n_down = int(np.count_nonzero(down_origins == asn))
            up_pcts[asn].append(_pct(n_up, n_after))
            down_pcts[asn].append(_pct(n_down, n_before))
        member_cache.pop(i, None)

    count_by_asn = {int(a): int(c) for a, c in zip(asns, counts)}
    rows = [
        AsChurnRow(
            asn=a,
            active_addrs=count_by_asn[a],
            up_median_pct=_median(up_pcts[a]),
            down_median_pct=_median(down_pcts[a]),
        )
        for a in sorted(eligible)
    ]
    up_cdf = _cdf([(r.up_median_pct, r.asn) for r in rows])
    down_cdf = _cdf([(r.down_median_pct, r.asn) for r in rows])
    return PerAsChurn(rows, up_cdf, down_cdf)


def _cdf(value_key_pairs) -> list[tuple[float, float]]:
    pairs = sorted(value_key_pairs)
    n = len(pairs)
    return [(v, (i + 1) / n) for i, (v, _) in enumerate(pairs)]
