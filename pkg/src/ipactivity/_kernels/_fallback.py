"""Pure Python activity-record parser.

Used when the compiled kernel is unavailable or explicitly disabled. Both
backends accept exactly the same grammar:

    YYYY-MM-DD,<dotted-quad>,<hits>\n

Dates must be real calendar dates, octets are canonical (no leading zeros),
and hit counts are decimal integers in [1, 2**64 - 1]. A single trailing
carriage return per line is tolerated. Blank lines carry no record and are
skipped without comment; they still count for line numbering.
"""

from __future__ import annotations

import datetime

import numpy as np

BACKEND = "python"

_EPOCH_ORDINAL = datetime.date(1970, 1, 1).toordinal()
_U64_MAX = 2**64 - 1
_OCTETS = {str(v).encode(): v for v in range(256)}


class _DateCache(dict):
    """Maps date byte strings to epoch day numbers, validating on first use."""

    def __missing__(self, key):
        if len(key) != 10 or key[4] != 0x2D or key[7] != 0x2D:
            raise ValueError(key)
        y, m, d = key[0:4], key[5:7], key[8:10]
        if not (y.isdigit() and m.isdigit() and d.isdigit()):
            raise ValueError(key)
        day = datetime.date(int(y), int(m), int(d)).toordinal() - _EPOCH_ORDINAL
        self[key] = day
        return day


def parse_activity(buf: bytes, first_line: int = 1):
    """Parse one buffer of complete activity lines.

    Returns (days, ips, hits, bad, n_lines) where the first three are aligned
    numpy arrays (int32 epoch days, uint32 addresses, uint64 hit counts), bad
    is a list of (line_number, reason) for rejected lines, and n_lines counts
    every line seen including blank and rejected ones.
    """
    lines = buf.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    n = len(lines)
    days = np.empty(n, np.int32)
    ips = np.empty(n, np.uint32)
    hits = np.empty(n, np.uint64)
    bad = []
    k = 0
    dates = _DateCache()
    octets = _OCTETS
    for i, raw in enumerate(lines):
        if raw.endswith(b"\r"):
            raw = raw[:-1]
        if not raw:
            continue
        parts = raw.split(b",")
        if len(parts) != 3:
            bad.append((first_line + i, "expected 3 comma-separated fields"))
            continue
        try:
            day = dates[parts[0]]
        except ValueError:
            bad.append((first_line + i, "malformed date"))
            continue
        quad = parts[1].split(b".")
        if len(quad) != 4:
            bad.append((first_line + i, "malformed address"))
            continue
        try:
            ip = (
                (octets[quad[0]] << 24)
                | (octets[quad[1]] << 16)
                | (octets[quad[2]] << 8)
                | octets[quad[3]]
            )
        except KeyError:
            bad.append((first_line + i, "malformed address"))
            continue
        text = parts[2]
        if not text.isdigit():
            bad.append((first_line + i, "malformed hit count"))
            continue
        value = int(text)
        if value < 1 or value > _U64_MAX:
            bad.append((first_line + i, "hit count out of range"))
            continue
        days[k] = day
        ips[k] = ip
        hits[k] = value
        k += 1
    return days[:k], ips[:k], hits[:k], bad, n
