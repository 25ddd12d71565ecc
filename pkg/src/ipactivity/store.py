"""Activity data model: per-/24 hit matrices, ingestion, and the sealed store.

The observation period is a contiguous range of days. Every /24 block that
ever shows activity gets a dense 256 x T matrix of uint32 hit counts; an
address is active on a day when its cell is nonzero. Blocks are kept in
ascending numeric order so every walk over the store is deterministic.

Sealed store file layout (version 1, all integers little-endian):

    offset  size  field
    0       8     magic "IPACTST1"
    8       2     format version (1)
    10      2     reserved (0)
    12      4     days T
    16      8     first day as days since 1970-01-01 (signed)
    24      4     block count
    28      7*8   counters: lines, records, skipped, distinct cells,
                  saturated cells, hits parsed, hits stored
    84      ...   block records, ascending by block id

Each block record is a 4-byte block id, a 1-byte encoding tag, then either
the raw 256*T uint32 matrix (tag 0) or a sparse pair of uint32 arrays (tag 1:
cell count n, then n flat cell indexes ascending, then n values). The writer
picks sparse when fewer than half the cells are nonzero, so identical stores
serialize to identical bytes.
"""

from __future__ import annotations

import datetime
import gzip
import io
import logging
import os
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import addrs
from ._kernels import parse_activity
from .errors import DataError, IngestError

log = logging.getLogger(__name__)

EPOCH_ORDINAL = datetime.date(1970, 1, 1).toordinal()
BLOCK_SIZE = 256
U32_MAX = 2**32 - 1

MAGIC = b"IPACTST1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHIqI")
_COUNTERS = struct.Struct("<7Q")
_BLOCK_HEAD = struct.Struct("<IB")

_CHUNK_BYTES = 32 << 20


def parse_day(text: str) -> datetime.date:
    """Parse a strict YYYY-MM-DD date string."""
    if len(text) != 10 or text[4] != "-" or text[7] != "-":
        raise DataError(f"bad date {text!r}")
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise DataError(f"bad date {text!r}") from None


@dataclass(frozen=True)
class DayRange:
    """Contiguous observation period; days are indexed 0..days-1."""

    first_day: datetime.date
    days: int

    def __post_init__(self):
        if isinstance(self.first_day, str):
            object.__setattr__(self, "first_day", parse_day(self.first_day))
        if self.days < 1:
            raise DataError("day range must cover at least one day")

    @property
    def first_epoch(self) -> int:
        return self.first_day.toordinal() - EPOCH_ORDINAL

    @property
    def last_epoch(self) -> int:
        return self.first_epoch + self.days - 1

    def date_of(self, day_index: int) -> datetime.date:
        self.check_day(day_index)
        return self.first_day + datetime.timedelta(days=day_index)

    def index_of(self, day: datetime.date) -> int:
        idx = day.toordinal() - EPOCH_ORDINAL - self.first_epoch
        if not 0 <= idx < self.days:
            raise ValueError(f"{day} outside observation period")
        return idx

    def check_day(self, day_index: int):
        if not 0 <= day_index < self.days:
            raise ValueError(f"day index {day_index} outside 0..{self.days - 1}")

    def check_window(self, lo: int, hi: int):
        self.check_day(lo)
        self.check_day(hi)
        if lo > hi:
            raise ValueError(f"empty window {lo}..{hi}")

    def iter_dates(self):
        for i in range(self.days):
            yield self.first_day + datetime.timedelta(days=i)


class ActivityMatrix:
    """Dense per-/24 activity: 256 addresses by T days of hit counts."""

    __slots__ = ("block", "hits", "_active")

    def __init__(self, block: int, hits: np.ndarray):
        if hits.shape[0] != BLOCK_SIZE or hits.ndim != 2:
            raise ValueError("hit matrix must be 256 x days")
        if hits.dtype != np.uint32:
            hits = hits.astype(np.uint32)
        hits = np.ascontiguousarray(hits)
        hits.flags.writeable = False
        self.block = block
        self.hits = hits
        self._active = None

    @property
    def days(self) -> int:
        return self.hits.shape[1]

    @property
    def active(self) -> np.ndarray:
        if self._active is None:
            a = self.hits > 0
            a.flags.writeable = False
            self._active = a
        return self._active

    def window_active(self, lo: int, hi: int) -> np.ndarray:
        """Boolean vector of addresses active at least once in days lo..hi."""
        return self.active[:, lo : hi + 1].any(axis=1)

    def window_union(self, windows) -> np.ndarray:
        """256 x len(windows) activity, one column per (lo, hi) window.

        Windows must be contiguous, equal-sized, and start at day 0, which is
        what make_windows produces; that lets a single reduceat do the work.
        """
        if not windows:
            raise ValueError("need at least one window")
        starts = [lo for lo, _ in windows]
        end = windows[-1][1] + 1
        return np.logical_or.reduceat(self.active[:, :end], starts, axis=1)

    def daily_active_counts(self) -> np.ndarray:
        return np.count_nonzero(self.active, axis=0).astype(np.int64)

    def total_hits(self) -> int:
        return int(self.hits.sum(dtype=np.uint64))

    def __eq__(self, other):
        if not isinstance(other, ActivityMatrix):
            return NotImplemented
        return self.block == other.block and np.array_equal(self.hits, other.hits)

    def __hash__(self):
        return hash((self.block, self.hits.tobytes()))


@dataclass
class IngestStats:
    """Data-quality counters accumulated while building a store."""

    lines: int = 0
    records: int = 0
    skipped: int = 0
    distinct_cells: int = 0
    saturated_cells: int = 0
    hits_parsed: int = 0
    hits_stored: int = 0

    def as_dict(self) -> dict:
        return {
            "lines": self.lines,
            "records": self.records,
            "skipped": self.skipped,
            "distinct_cells": self.distinct_cells,
            "saturated_cells": self.saturated_cells,
            "hits_parsed": self.hits_parsed,
            "hits_stored": self.hits_stored,
        }


class ActivityStore:
    """All activity matrices for one observation period, ascending by block."""

    def __init__(self, day_range: DayRange, matrices: dict[int, ActivityMatrix], stats: IngestStats | None = None):
        for block, m in matrices.items():
            if m.days != day_range.days:
                raise ValueError(f"matrix for block {block} does not span the day range")
        self.day_range = day_range
        self._matrices = dict(sorted(matrices.items()))
        self.block_ids = np.fromiter(self._matrices.keys(), np.uint32, len(self._matrices))
        self.stats = stats if stats is not None else IngestStats()

    @property
    def n_blocks(self) -> int:
        return len(self._matrices)

    def __iter__(self):
        return iter(self._matrices.values())

    def __contains__(self, block: int) -> bool:
        return block in self._matrices

    def get(self, block: int) -> ActivityMatrix | None:
        return self._matrices.get(block)

    def active_set(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        """Sorted uint32 addresses active at least once in days lo..hi."""
        lo, hi = self._window(lo, hi)
        parts = []
        for m in self:
            rows = np.flatnonzero(m.window_active(lo, hi))
            if rows.size:
                parts.append((m.block << 8) + rows.astype(np.uint32))
        if not parts:
            return np.empty(0, np.uint32)
        return np.concatenate(parts)

    def active_block_ids(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        lo, hi = self._window(lo, hi)
        ids = [m.block for m in self if m.window_active(lo, hi).any()]
        return np.asarray(ids, np.uint32)

    def daily_active_counts(self) -> np.ndarray:
        out = np.zeros(self.day_range.days, np.int64)
        for m in self:
            out += m.daily_active_counts()
        return out

    def total_hits(self) -> int:
        return sum(m.total_hits() for m in self)

    def _window(self, lo, hi):
        if lo is None:
            lo = 0
        if hi is None:
            hi = self.day_range.days - 1
        self.day_range.check_window(lo, hi)
        return lo, hi

    def __eq__(self, other):
        if not isinstance(other, ActivityStore):
            return NotImplemented
        return (
            self.day_range == other.day_range
            and list(self._matrices) == list(other._matrices)
            and all(a == b for a, b in zip(self._matrices.values(), other._matrices.values()))
        )

    # -- sealed binary form ------------------------------------------------

    def save(self, path):
        """Write the sealed byte-exact form, atomically."""
        path = os.fspath(path)
        tmp = path + ".tmp"
        t = self.day_range.days
        st = self.stats
        try:
            with open(tmp, "wb") as f:
                f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, 0, t, self.day_range.first_epoch, self.n_blocks))
                f.write(
                    _COUNTERS.pack(
                        st.lines,
                        st.records,
                        st.skipped,
                        st.distinct_cells,
                        st.saturated_cells,
                        min(st.hits_parsed, 2**64 - 1),
                        min(st.hits_stored, 2**64 - 1),
                    )
                )
                for m in self:
                    flat = m.hits.reshape(-1)
                    cells = np.flatnonzero(flat)
                    if cells.size * 2 < flat.size:
                        f.write(_BLOCK_HEAD.pack(m.block, 1))
                        f.write(struct.pack("<I", cells.size))
                        f.write(cells.astype("<u4").tobytes())
                        f.write(flat[cells].astype("<u4").tobytes())
                    else:
                        f.write(_BLOCK_HEAD.pack(m.block, 0))
                        f.write(m.hits.astype("<u4").tobytes())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "ActivityStore":
        path = os.fspath(path)
        with open(path, "rb") as f:
            data = f.read()
        if len(data) < _HEADER.size + _COUNTERS.size:
            raise DataError(f"{path}: truncated store file")
        magic, version, _, t, first_epoch, n_blocks = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise DataError(f"{path}: not a sealed activity store")
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported store version {version}")
        counters = _COUNTERS.unpack_from(data, _HEADER.size)
        stats = IngestStats(*counters)
        first_day = datetime.date.fromordinal(first_epoch + EPOCH_ORDINAL)
        day_range = DayRange(first_day, t)
        pos = _HEADER.size + _COUNTERS.size
        matrices: dict[int, ActivityMatrix] = {}
        last_block = -1
        for _ in range(n_blocks):
            try:
                block, tag = _BLOCK_HEAD.unpack_from(data, pos)
            except struct.error:
                raise DataError(f"{path}: truncated store file") from None
            pos += _BLOCK_HEAD.size
            if block <= last_block:
                raise DataError(f"{path}: block order violated at {block}")
            last_block = block
            if tag == 0:
                nbytes = BLOCK_SIZE * t * 4
                if pos + nbytes > len(data):
                    raise DataError(f"{path}: truncated store file")
                hits = np.frombuffer(data, "<u4", BLOCK_SIZE * t, pos).reshape(BLOCK_SIZE, t)
                pos += nbytes
            elif tag == 1:
                (n_cells,) = struct.unpack_from("<I", data, pos)
                pos += 4
                nbytes = n_cells * 8
                if pos + nbytes > len(data):
                    raise DataError(f"{path}: truncated store file")
                cells = np.frombuffer(data, "<u4", n_cells, pos)
                values = np.frombuffer(data, "<u4", n_cells, pos + n_cells * 4)
                pos += nbytes
                hits = np.zeros(BLOCK_SIZE * t, np.uint32)
                hits[cells] = values
                hits = hits.reshape(BLOCK_SIZE, t)
            else:
                raise DataError(f"{path}: unknown block encoding {tag}")
            matrices[block] = ActivityMatrix(block, hits.copy())
        if pos != len(data):
            raise DataError(f"{path}: trailing bytes after last block")
        return cls(day_range, matrices, stats)


# -- ingestion ---------------------------------------------------------------


def _byte_chunks(source):
    """Yield byte chunks from a path, a stream, or an iterable of lines."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as raw:
            head = raw.read(2)
            raw.seek(0)
            f = gzip.open(raw, "rb") if head == b"\x1f\x8b" else raw
            while True:
                chunk = f.read(_CHUNK_BYTES)
                if not chunk:
                    return
                yield chunk
        return
    if hasattr(source, "read"):
        while True:
            chunk = source.read(_CHUNK_BYTES)
            if not chunk:
                return
            yield chunk.encode("utf-8") if isinstance(chunk, str) else chunk
        return
    batch = []
    size = 0
    for line in source:
        data = line.encode("utf-8") if isinstance(line, str) else line
        if not data.endswith(b"\n"):
            data += b"\n"
        batch.append(data)
        size += len(data)
        if size >= _CHUNK_BYTES:
            yield b"".join(batch)
            batch, size = [], 0
    if batch:
        yield b"".join(batch)


def _locate_out_of_range(buf: bytes, first_line: int, day_range: DayRange) -> int:
    """Line number of the first record in buf dated outside the range."""
    from ._kernels import _fallback

    line = first_line
    for raw in buf.split(b"\n"):
        days, _, _, _, _ = _fallback.parse_activity(raw + b"\n", line)
        if days.size and not (day_range.first_epoch <= days[0] <= day_range.last_epoch):
            return line
        line += 1
    return first_line


def ingest_activity(source, day_range: DayRange, *, strict: bool = True) -> ActivityStore:
    """Build an ActivityStore from activity CSV records.

    source may be a filesystem path (gzip detected by magic bytes), an open
    stream, or an iterable of lines. In strict mode the first malformed line
    aborts the ingest; otherwise malformed lines are counted and skipped.
    A record dated outside the declared day range is an error either way,
    since it means the declaration itself is wrong.
    """
    stats = IngestStats()
    day_parts: list[np.ndarray] = []
    ip_parts: list[np.ndarray] = []
    hit_parts: list[np.ndarray] = []
    line_no = 1
    carry = b""
    lo, hi = day_range.first_epoch, day_range.last_epoch

    def feed(buf: bytes):
        nonlocal line_no
        days, ips, hits, bad, n_lines = parse_activity(buf, line_no)
        line_no += n_lines
        if bad:
            if strict:
                bad_line, reason = bad[0]
                raise IngestError(reason, line=bad_line)
            stats.skipped += len(bad)
            for bad_line, reason in bad[:3]:
                log.warning("skipping line %d: %s", bad_line, reason)
        if days.size:
            d0, d1 = int(days.min()), int(days.max())
            if d0 < lo or d1 > hi:
                raise IngestError(
                    "date outside the declared observation period",
                    line=_locate_out_of_range(buf, line_no - n_lines, day_range),
                )
            day_parts.append(days)
            ip_parts.append(ips)
            hit_parts.append(hits)
            stats.records += days.size
            stats.hits_parsed += int(hits.sum(dtype=np.uint64))

    for chunk in _byte_chunks(source):
        buf = carry + chunk
        cut = buf.rfind(b"\n")
        if cut < 0:
            carry = buf
            continue
        carry = buf[cut + 1 :]
        feed(buf[: cut + 1])
    if carry:
        feed(carry)
    stats.lines = line_no - 1

    matrices = _assemble(day_range, day_parts, ip_parts, hit_parts, stats)
    return ActivityStore(day_range, matrices, stats)


def _assemble(day_range, day_parts, ip_parts, hit_parts, stats) -> dict[int, ActivityMatrix]:
    """Fold parsed records into dense per-block matrices.

    Records are keyed by flat (address, day) cell; duplicate cells sum.
    Sums beyond uint32 saturate and are counted, not silently wrapped.
    """
    if not day_parts:
        return {}
    t = day_range.days
    days = np.concatenate(day_parts)
    ips = np.concatenate(ip_parts)
    hits = np.concatenate(hit_parts)
    day_parts.clear()
    ip_parts.clear()
    hit_parts.clear()

    cell = ips.astype(np.uint64) * t + (days - day_range.first_epoch).astype(np.uint64)
    order = np.argsort(cell, kind="stable")
    cell = cell[order]
    hits = hits[order]
    del order, days, ips
    starts = np.concatenate(([0], np.flatnonzero(np.diff(cell)) + 1))
    uniq = cell[starts]
    sums = np.add.reduceat(hits, starts)
    # reduceat can wrap on uint64; with uint32 inputs that needs 2**32
    # duplicates of one cell, which cannot fit in memory, but record hit
    # values themselves may be large, so detect wrap via a float shadow.
    approx = np.add.reduceat(hits.astype(np.float64), starts)
    wrapped = approx > 2**64
    if wrapped.any():
        sums = sums.copy()
        sums[wrapped] = U32_MAX + 1
    del cell, hits

    stats.distinct_cells = int(uniq.size)
    over = sums > U32_MAX
    stats.saturated_cells = int(np.count_nonzero(over))
    values = np.minimum(sums, U32_MAX).astype(np.uint32)
    stats.hits_stored = int(values.sum(dtype=np.uint64))

    blocks = (uniq // t) >> 8
    rows = ((uniq // t) & 0xFF).astype(np.intp)
    cols = (uniq % t).astype(np.intp)
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(blocks)) + 1, [blocks.size]))
    matrices: dict[int, ActivityMatrix] = {}
    for s, e in zip(bounds[:-1], bounds[1:]):
        dense = np.zeros((BLOCK_SIZE, t), np.uint32)
        dense[rows[s:e], cols[s:e]] = values[s:e]
        block = int(blocks[s])
        matrices[block] = ActivityMatrix(block, dense)
    return matrices


# -- user agent samples ------------------------------------------------------


class UASampleSet:
    """Per-(/24, day) multisets of sampled user agent strings."""

    def __init__(self, day_range: DayRange):
        self.day_range = day_range
        self._blocks: dict[int, dict[int, Counter]] = {}
        self.records = 0
        self.skipped = 0

    def add(self, ip: int, day_index: int, ua: bytes, n: int = 1):
        block = ip >> 8
        per_day = self._blocks.setdefault(block, {})
        counter = per_day.setdefault(day_index, Counter())
        counter[ua] += n
        self.records += n

    def block_ids(self) -> list[int]:
        return sorted(self._blocks)

    def sample_count(self) -> int:
        return sum(sum(c.total() for c in per_day.values()) for per_day in self._blocks.values())

    def window_counts(self, block: int, lo: int, hi: int) -> tuple[int, int]:
        """(sample count, distinct strings) for one block over days lo..hi."""
        self.day_range.check_window(lo, hi)
        per_day = self._blocks.get(block)
        if not per_day:
            return 0, 0
        total = 0
        seen: set[bytes] = set()
        for day, counter in per_day.items():
            if lo <= day <= hi:
                total += counter.total()
                seen.update(counter.keys())
        return total, len(seen)


def ingest_ua_samples(source, day_range: DayRange, *, strict: bool = True) -> UASampleSet:
    """Read user agent sample CSV: date, address, quoted string.

    Rows follow RFC 4180 quoting, so strings may contain commas and escaped
    quotes. Unbalanced quoting is a record-level error.
    """
    import csv

    out = UASampleSet(day_range)
    close: list = []
    if isinstance(source, (str, os.PathLike)):
        raw = open(source, "rb")
        close.append(raw)
        head = raw.read(2)
        raw.seek(0)
        inner = gzip.open(raw, "rb") if head == b"\x1f\x8b" else raw
        stream = io.TextIOWrapper(inner, encoding="utf-8", newline="")
        close.insert(0, stream)
    elif hasattr(source, "read"):
        stream = source
    else:
        stream = iter(source)

    reader = csv.reader(stream, strict=True)
    try:
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                if strict:
                    raise IngestError(f"bad quoting: {exc}", line=reader.line_num) from None
                out.skipped += 1
                continue
            except UnicodeDecodeError as exc:
                raise IngestError(f"input is not UTF-8: {exc}", line=reader.line_num) from None
            if not row:
                continue
            try:
                if len(row) != 3:
                    raise DataError("expected 3 fields")
                day = parse_day(row[0])
                ip = addrs.ip_to_int(row[1])
            except DataError as exc:
                if strict:
                    raise IngestError(str(exc), line=reader.line_num) from None
                out.skipped += 1
                continue
            epoch = day.toordinal() - EPOCH_ORDINAL
            if not day_range.first_epoch <= epoch <= day_range.last_epoch:
                raise IngestError(
                    "date outside the declared observation period", line=reader.line_num
                )
            out.add(ip, epoch - day_range.first_epoch, row[2].encode("utf-8"))
    finally:
        for f in close:
            f.close()
    return out
