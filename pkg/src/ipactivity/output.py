"""Deterministic file output helpers shared by the CLI and the validator.

All writers go through a temp-file-plus-rename so a crashed run never leaves
a truncated artifact, and all numeric formatting is pinned (shortest %.10g
for floats) so identical inputs reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

FLOAT_FORMAT = "%.10g"

# Column layouts shared between the CLI writers and the validation reader.
EVENTS_COLUMNS = ("address", "kind", "boundary", "mask", "bgp_class")
BLOCK_METRICS_COLUMNS = (
    "block", "fd", "stu", "monthly_stu", "max_delta_stu", "change_class", "assignment_tag",
)
MASK_HISTOGRAM_COLUMNS = ("mask", "events", "fraction")
HOST_DENSITY_COLUMNS = ("block", "samples", "distinct_ua")
TOP_DECILE_COLUMNS = ("window_index", "first_day", "share")
DAYS_ACTIVE_COLUMNS = (
    "days_active", "addresses", "total_hits",
    "daily_hits_p5", "daily_hits_p25", "daily_hits_p50", "daily_hits_p75", "daily_hits_p95",
    "cumulative_address_share", "cumulative_traffic_share",
)


def atomic_bytes(path, data: bytes):
    """Write bytes to path via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_text(path, text: str):
    atomic_bytes(path, text.encode("utf-8"))


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def write_csv(path, columns, rows, *, plot: str | None = None):
    """Write a CSV with an optional leading comment naming the plot it feeds."""
    lines = []
    if plot:
        lines.append(f"# plot: {plot}\n")
    lines.append(",".join(columns) + "\n")
    for row in rows:
        lines.append(",".join(format_value(v) for v in row) + "\n")
    atomic_text(path, "".join(lines))


def read_csv(path):
    """Read back a write_csv file: (columns, list of row dicts, all strings)."""
    with open(path, "r", encoding="utf-8") as f:
        columns = None
        rows = []
        for raw in f:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if columns is None:
                columns = parts
                continue
            rows.append(dict(zip(columns, parts)))
    if columns is None:
        raise ValueError(f"{path} has no header row")
    return columns, rows


def write_json(path, obj):
    atomic_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
