"""Per-/24 utilization metrics and assignment classification.

Filling degree (FD) counts the addresses of a block that were active at
least once in a window; it ranges 1..256 for any block that made it into the
store. Spatio-temporal utilization (STU) is the number of active
address-days divided by the maximum possible, 256 times the window length.
Both are computed in integer arithmetic and divided once, so equal inputs
give bit-equal results.

Change detection slices the period into 28-day months (four aligned weeks,
so weekday effects cancel), computes per-month STU, and takes the signed
month-over-month delta of largest magnitude. A block is "major" when that
magnitude strictly exceeds the threshold.

Assignment tags come from PTR names: an address is static if its lowercased
name contains "static", dynamic if it contains "dynamic" or "pool". A name
matching both ways is counted as classified but supports neither tag. The
block takes a tag when at least min_classified addresses are classified and
one class covers at least the consistency share of them.
"""

from __future__ import annotations

import gzip
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import addrs
from .errors import DataError, IngestError
from .store import ActivityMatrix, ActivityStore, BLOCK_SIZE

log = logging.getLogger(__name__)

MONTH_DAYS = 28
DEFAULT_CHANGE_THRESHOLD = 0.25
DEFAULT_MIN_CLASSIFIED = 16
DEFAULT_CONSISTENCY = 0.90
DEFAULT_FD_FLOOR = 250
STU_HISTOGRAM_BINS = 20

ASSIGNMENT_TAGS = ("static", "dynamic", "unknown")
CHANGE_CLASSES = ("major", "minor")


@dataclass(frozen=True)
class ChangeClassifierConfig:
    threshold: float = DEFAULT_CHANGE_THRESHOLD
    month_days: int = MONTH_DAYS

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("change threshold must be in (0, 1)")
        if self.month_days < 1:
            raise ValueError("month length must be at least one day")


def _window(matrix: ActivityMatrix, lo, hi):
    if lo is None:
        lo = 0
    if hi is None:
        hi = matrix.days - 1
    if not (0 <= lo <= hi < matrix.days):
        raise ValueError(f"window {lo}..{hi} outside 0..{matrix.days - 1}")
    return lo, hi


def filling_degree(matrix: ActivityMatrix, lo: int | None = None, hi: int | None = None) -> int:
    """Number of addresses active on at least one day of the window."""
    lo, hi = _window(matrix, lo, hi)
    return int(np.count_nonzero(matrix.window_active(lo, hi)))


def active_cells(matrix: ActivityMatrix, lo: int | None = None, hi: int | None = None) -> int:
    lo, hi = _window(matrix, lo, hi)
    return int(np.count_nonzero(matrix.active[:, lo : hi + 1]))


def stu(matrix: ActivityMatrix, lo: int | None = None, hi: int | None = None) -> float:
    """Active address-days divided by 256 times the window length."""
    lo, hi = _window(matrix, lo, hi)
    return active_cells(matrix, lo, hi) / (BLOCK_SIZE * (hi - lo + 1))


def monthly_stu(matrix: ActivityMatrix, month_days: int = MONTH_DAYS) -> list[float]:
    """Per-month STU values; a trailing partial month is dropped."""
    if month_days < 1:
        raise ValueError("month length must be at least one day")
    months = matrix.days // month_days
    return [
        stu(matrix, k * month_days, (k + 1) * month_days - 1) for k in range(months)
    ]


def detect_change(
    matrix: ActivityMatrix, config: ChangeClassifierConfig = ChangeClassifierConfig()
) -> tuple[float, str]:
    """Largest-magnitude signed month-over-month STU delta and its class.

    Ties in magnitude resolve to the earliest month boundary. The class is
    major only when |delta| strictly exceeds the threshold.
    """
    series = monthly_stu(matrix, config.month_days)
    if len(series) < 2:
        raise DataError(
            f"change detection needs at least 2 complete {config.month_days}-day months"
        )
    deltas = np.diff(series)
    idx = int(np.argmax(np.abs(deltas)))
    delta = float(deltas[idx])
    return delta, ("major" if abs(delta) > config.threshold else "minor")


# -- PTR records and assignment tags ------------------------------------------


class PtrRecordSet:
    """Address to lowercased PTR name, at most one name per address."""

    def __init__(self):
        self._names: dict[int, bytes] = {}
        self.duplicates = 0

    def __len__(self):
        return len(self._names)

    def name(self, ip: int) -> bytes | None:
        return self._names.get(ip)

    def add(self, ip: int, name):
        if isinstance(name, str):
            name = name.encode("utf-8")
        if ip in self._names:
            self.duplicates += 1
        self._names[ip] = name.lower()

    @classmethod
    def load(cls, source) -> "PtrRecordSet":
        """Read `<dotted-quad>,<ptr-name>` lines; later duplicates win."""
        out = cls()
        if isinstance(source, (str, os.PathLike)):
            opener = gzip.open if str(source).endswith(".gz") else open
            with opener(source, "rt", encoding="utf-8") as f:
                out._read(f)
        else:
            out._read(source)
        if out.duplicates:
            log.warning("PTR file had %d duplicate addresses; last name wins", out.duplicates)
        return out

    def _read(self, lines):
        for n, raw in enumerate(lines, 1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            ip_text, sep, name = line.partition(",")
            if not sep or not name:
                raise IngestError(f"bad PTR record {line!r}", line=n)
            try:
                ip = addrs.ip_to_int(ip_text)
            except DataError as exc:
                raise IngestError(str(exc), line=n) from None
            self.add(ip, name.encode("utf-8"))


def classify_address(name: bytes | None) -> str | None:
    """Per-address class: static, dynamic, conflicting, or None (unclassified)."""
    if name is None:
        return None
    is_static = b"static" in name
    is_dynamic = b"dynamic" in name or b"pool" in name
    if is_static and is_dynamic:
        return "conflicting"
    if is_static:
        return "static"
    if is_dynamic:
        return "dynamic"
    return None


def classify_assignment(
    block: int,
    ptrs: PtrRecordSet,
    *,
    min_classified: int = DEFAULT_MIN_CLASSIFIED,
    consistency: float = DEFAULT_CONSISTENCY,
) -> str:
    """Block-level static/dynamic tag from the names of its 256 addresses."""
    counts = {"static": 0, "dynamic": 0, "conflicting": 0}
    base = block << 8
    for off in range(BLOCK_SIZE):
        cls = classify_address(ptrs.name(base + off))
        if cls is not None:
            counts[cls] += 1
    classified = sum(counts.values())
    if classified < min_classified:
        return "unknown"
    for tag in ("static", "dynamic"):
        if counts[tag] >= consistency * classified:
            return tag
    return "unknown"


# -- per-block metric rows -----------------------------------------------------


@dataclass
class BlockMetrics:
    block: int
    fd: int
    stu: float
    monthly_stu: list[float]
    max_delta_stu: float | None
    change_class: str | None
    assignment_tag: str


def compute_block_metrics(
    store: ActivityStore,
    ptrs: PtrRecordSet | None = None,
    *,
    change_config: ChangeClassifierConfig = ChangeClassifierConfig(),
    min_classified: int = DEFAULT_MIN_CLASSIFIED,
    consistency: float = DEFAULT_CONSISTENCY,
) -> list[BlockMetrics]:
    """Full metric row per block, ascending by block id.

    Blocks dark for a whole month still participate in change detection with
    a zero STU for that month. Periods shorter than two months leave the
    change fields empty rather than failing the whole run.
    """
    if ptrs is None:
        ptrs = PtrRecordSet()
    months = store.day_range.days // change_config.month_days
    out = []
    for m in store:
        series = monthly_stu(m, change_config.month_days) if months >= 1 else []
        if months >= 2:
            delta, change_class = detect_change(m, change_config)
        else:
            delta, change_class = None, None
        out.append(
            BlockMetrics(
                block=m.block,
                fd=filling_degree(m),
                stu=stu(m),
                monthly_stu=series,
                max_delta_stu=delta,
                change_class=change_class,
                assignment_tag=classify_assignment(
                    m.block, ptrs, min_classified=min_classified, consistency=consistency
                ),
            )
        )
    return out


# -- population summaries ------------------------------------------------------


@dataclass
class FdDistribution:
    subset: str
    n_blocks: int
    points: list[tuple[int, float]]  # (fd, cumulative fraction), fd = 1..256
    fd_lt_64_share: float | None
    fd_gt_250_share: float | None


def fd_distribution(metrics: list[BlockMetrics], subset: str = "all") -> FdDistribution:
    """CDF of filling degree over all blocks or one assignment-tag subset."""
    if subset not in ("all", "static", "dynamic"):
        raise ValueError(f"unknown subset {subset!r}")
    fds = [m.fd for m in metrics if subset == "all" or m.assignment_tag == subset]
    n = len(fds)
    if n == 0:
        return FdDistribution(subset, 0, [], None, None)
    counts = np.bincount(fds, minlength=257)
    cum = np.cumsum(counts)
    points = [(fd, cum[fd] / n) for fd in range(1, 257)]
    lt64 = sum(1 for fd in fds if fd < 64) / n
    gt250 = sum(1 for fd in fds if fd > 250) / n
    return FdDistribution(subset, n, points, lt64, gt250)


@dataclass
class UtilizationHistogram:
    fd_floor: int
    n_blocks: int
    counts: list[int]  # STU_HISTOGRAM_BINS bins of width 0.05, upper-inclusive


def utilization_histogram(
    metrics: list[BlockMetrics], fd_floor: int = DEFAULT_FD_FLOOR
) -> UtilizationHistogram:
    """Histogram of STU over blocks whose FD strictly exceeds fd_floor."""
    counts = [0] * STU_HISTOGRAM_BINS
    n = 0
    for m in metrics:
        if m.fd > fd_floor:
            n += 1
            counts[_stu_bin(m.stu)] += 1
    return UtilizationHistogram(fd_floor, n, counts)


def _stu_bin(value: float) -> int:
    if not 0 <= value <= 1:
        raise ValueError(f"STU {value} outside [0, 1]")
    if value == 0:
        return 0
    b = int(np.ceil(value * STU_HISTOGRAM_BINS)) - 1
    return min(b, STU_HISTOGRAM_BINS - 1)


def potential_utilization_report(metrics: list[BlockMetrics]) -> dict:
    """Headline shares about under- and over-used address blocks.

    Dynamic-subset shares are reported as None when no block carries the
    dynamic tag; absence of data is not the same as a zero share.
    """
    if not metrics:
        raise DataError("no block metrics to summarize")
    n = len(metrics)
    dynamic = [m for m in metrics if m.assignment_tag == "dynamic"]
    report = {
        "blocks": n,
        "fd_lt_64_share": sum(1 for m in metrics if m.fd < 64) / n,
        "fd_gt_250_share": sum(1 for m in metrics if m.fd > 250) / n,
        "dynamic_blocks": len(dynamic),
        "dynamic_stu_gt_0_8_share": None,
        "dynamic_stu_lt_0_6_share": None,
        "dynamic_stu_lt_0_2_share": None,
    }
    if dynamic:
        nd = len(dynamic)
        report["dynamic_stu_gt_0_8_share"] = sum(1 for m in dynamic if m.stu > 0.8) / nd
        report["dynamic_stu_lt_0_6_share"] = sum(1 for m in dynamic if m.stu < 0.6) / nd
        report["dynamic_stu_lt_0_2_share"] = sum(1 for m in dynamic if m.stu < 0.2) / nd
    return report
