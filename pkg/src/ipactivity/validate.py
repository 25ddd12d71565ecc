"""Checks analysis outputs against a generated scenario's ground truth.

run_assertions() loads ground_truth.json assertion records, reads the named
analysis artifacts from a results directory, and evaluates each assertion to
a pass/fail with the measured value, the expectation, and the tolerance.
A missing artifact that an assertion needs is a hard error, not a failure:
it means the pipeline was not run, so there is nothing to judge.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

from . import addrs
from .errors import DataError
from .output import read_csv, read_json
from .traffic import classify_density_region, HostDensityRecord

log = logging.getLogger(__name__)


@dataclass
class AssertionResult:
    name: str
    kind: str
    ok: bool
    measured: object
    expected: object
    tol: float | None = None
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        parts = [f"{status} {self.name}: measured={self.measured} expected={self.expected}"]
        if self.tol is not None:
            parts.append(f"tol={self.tol:.6g}")
        if self.note:
            parts.append(self.note)
        return " ".join(parts)


@dataclass
class ValidationReport:
    results: list[AssertionResult] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.ok)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if not r.ok)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failed": self.failed,
            "results": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "ok": r.ok,
                    "measured": r.measured,
                    "expected": r.expected,
                    "tol": r.tol,
                    "note": r.note,
                }
                for r in self.results
            ],
        }


class _Artifacts:
    """Lazy, cached access to the analysis output files."""

    def __init__(self, results_dir):
        self.dir = os.fspath(results_dir)
        self._cache: dict[str, object] = {}

    def _path(self, name: str) -> str:
        path = os.path.join(self.dir, name)
        if not os.path.exists(path):
            raise DataError(f"missing analysis output {name} in {self.dir}")
        return path

    def metrics(self) -> dict[str, dict]:
        if "metrics" not in self._cache:
            _, rows = read_csv(self._path("block_metrics.csv"))
            self._cache["metrics"] = {r["block"]: r for r in rows}
        return self._cache["metrics"]

    def metric_row(self, block: str) -> dict:
        row = self.metrics().get(block)
        if row is None:
            raise DataError(f"block {block} absent from block_metrics.csv")
        return row

    def _windowed(self, stem: str, window: int) -> list[dict]:
        key = f"{stem}:{window}"
        if key not in self._cache:
            specific = os.path.join(self.dir, f"{stem}_w{window}.csv")
            path = specific if os.path.exists(specific) else self._path(f"{stem}.csv")
            _, rows = read_csv(path)
            self._cache[key] = rows
        return self._cache[key]

    def events(self, window: int) -> list[dict]:
        return self._windowed("events", window)

    def mask_histogram(self, window: int) -> list[dict]:
        return self._windowed("mask_histogram", window)

    def cube(self) -> dict:
        if "cube" not in self._cache:
            self._cache["cube"] = read_json(self._path("cube.json"))
        return self._cache["cube"]

    def top_decile(self) -> list[dict]:
        if "trend" not in self._cache:
            _, rows = read_csv(self._path("top_decile_trend.csv"))
            self._cache["trend"] = rows
        return self._cache["trend"]

    def host_density(self) -> dict[str, dict]:
        if "density" not in self._cache:
            _, rows = read_csv(self._path("host_density.csv"))
            self._cache["density"] = {r["block"]: r for r in rows}
        return self._cache["density"]

    def potential_utilization(self) -> dict:
        if "potential" not in self._cache:
            self._cache["potential"] = read_json(self._path("potential_utilization.json"))
        return self._cache["potential"]


def _block_of_event(row: dict) -> int:
    return addrs.ip_to_int(row["address"]) >> 8


def _event_counts_by_boundary(rows: list[dict], block_id: int, kind: str) -> dict[int, int]:
    counts: dict[int, int] = {}
    for row in rows:
        if row["kind"] != kind or _block_of_event(row) != block_id:
            continue
        b = int(row["boundary"])
        counts[b] = counts.get(b, 0) + 1
    return counts


def _close(measured: float, expected: float, tol: float) -> bool:
    return abs(measured - expected) <= tol + 1e-12


def _check(rec: dict, art: _Artifacts, truth: dict) -> AssertionResult:
    kind = rec["kind"]
    name = rec.get("name", kind)
    block = rec.get("block")

    if kind == "block_stu":
        row = art.metric_row(block)
        measured = float(row["stu"])
        ok = _close(measured, rec["expected"], rec["tol"])
        return AssertionResult(name, kind, ok, measured, rec["expected"], rec["tol"])

    if kind == "block_fd_range":
        row = art.metric_row(block)
        fd = int(row["fd"])
        lo, hi = rec["expected"]
        return AssertionResult(name, kind, lo <= fd <= hi, fd, rec["expected"])

    if kind == "block_tag":
        row = art.metric_row(block)
        return AssertionResult(name, kind, row["assignment_tag"] == rec["expected"],
                               row["assignment_tag"], rec["expected"])

    if kind == "block_change_class":
        row = art.metric_row(block)
        return AssertionResult(name, kind, row["change_class"] == rec["expected"],
                               row["change_class"], rec["expected"])

    if kind == "block_max_delta":
        row = art.metric_row(block)
        if row["max_delta_stu"] == "":
            return AssertionResult(name, kind, False, None, rec["expected"], rec["tol"],
                                   note="no delta reported")
        measured = float(row["max_delta_stu"])
        ok = _close(measured, rec["expected"], rec["tol"])
        return AssertionResult(name, kind, ok, measured, rec["expected"], rec["tol"])

    if kind == "major_set":
        majors = sorted(b for b, r in art.metrics().items() if r["change_class"] == "major")
        expected = sorted(rec["expected"])
        return AssertionResult(name, kind, majors == expected, majors, expected)

    if kind == "churn_zero":
        block_id = addrs.parse_prefix(block)[0] >> 8
        total = 0
        for w in rec["windows"]:
            for row in art.events(w):
                if _block_of_event(row) == block_id:
                    total += 1
        return AssertionResult(name, kind, total == 0, total, 0,
                               note=f"windows {rec['windows']}")

    if kind == "boundary_up_exact":
        block_id = addrs.parse_prefix(block)[0] >> 8
        w = rec["window"]
        boundaries = truth["days"] // w - 1
        counts = _event_counts_by_boundary(art.events(w), block_id, "up")
        per_boundary = [counts.get(i, 0) for i in range(boundaries)]
        ok = boundaries > 0 and all(c == rec["expected"] for c in per_boundary)
        measured = sorted(set(per_boundary))
        return AssertionResult(name, kind, ok, measured, rec["expected"],
                               note=f"{boundaries} boundaries at window {w}")

    if kind == "daily_up_mean":
        block_id = addrs.parse_prefix(block)[0] >> 8
        w = rec.get("window", 1)
        boundaries = truth["days"] // w - 1
        counts = _event_counts_by_boundary(art.events(w), block_id, "up")
        mean = sum(counts.get(i, 0) for i in range(boundaries)) / boundaries
        ok = _close(mean, rec["expected"], rec["tol"])
        return AssertionResult(name, kind, ok, mean, rec["expected"], rec["tol"])

    if kind == "host_density_region":
        row = art.host_density().get(block)
        if row is None:
            return AssertionResult(name, kind, False, None, rec["expected"],
                                   note="block absent from host_density.csv")
        record = HostDensityRecord(0, int(row["samples"]), int(row["distinct_ua"]))
        region = classify_density_region(record)
        return AssertionResult(name, kind, region == rec["expected"], region, rec["expected"],
                               note=f"samples={record.sample_count} distinct={record.distinct_ua}")

    if kind == "cube_total":
        measured = art.cube()["total"]
        return AssertionResult(name, kind, measured == rec["expected"], measured, rec["expected"])

    if kind == "cube_stu_split":
        cube = art.cube()
        counts = cube["counts"]
        total = cube["total"]
        if total == 0:
            return AssertionResult(name, kind, False, 0, rec["expected"], note="empty cube")
        per_bin = [0] * 10
        for i in range(10):
            per_bin[i] = sum(counts[i * 100 : (i + 1) * 100])
        low = sum(per_bin[b - 1] for b in rec["low_bins"]) / total
        high = sum(per_bin[b - 1] for b in rec["high_bins"]) / total
        tol = rec.get("tol", 0.0)
        ok = (
            _close(low, rec["low_share"], tol)
            and _close(high, rec["high_share"], tol)
            and low + high >= rec.get("min_union", 0.95) - 1e-12
        )
        return AssertionResult(name, kind, ok, {"low": low, "high": high},
                               {"low": rec["low_share"], "high": rec["high_share"]}, tol)

    if kind == "top_decile_delta":
        rows = art.top_decile()
        if len(rows) < 2:
            return AssertionResult(name, kind, False, None, rec["expected"],
                                   note="fewer than two trend windows")
        delta = float(rows[-1]["share"]) - float(rows[0]["share"])
        ok = _close(delta, rec["expected"], rec["tol"])
        return AssertionResult(name, kind, ok, delta, rec["expected"], rec["tol"])

    if kind == "mask_bucket_count":
        rows = art.mask_histogram(rec["window"])
        measured = 0
        for row in rows:
            if row["mask"] == str(rec["label"]):
                measured = int(row["events"])
                break
        return AssertionResult(name, kind, measured == rec["expected"], measured, rec["expected"],
                               note=f"window {rec['window']}")

    if kind in ("fd_share_lt64", "fd_share_gt250"):
        key = "fd_lt_64_share" if kind == "fd_share_lt64" else "fd_gt_250_share"
        measured = art.potential_utilization().get(key)
        ok = measured is not None and _close(measured, rec["expected"], rec.get("tol", 0.0))
        return AssertionResult(name, kind, ok, measured, rec["expected"], rec.get("tol", 0.0))

    raise DataError(f"unknown assertion kind {kind!r}")


def run_assertions(truth: dict, results_dir) -> ValidationReport:
    """Evaluate every ground-truth assertion against the analysis outputs."""
    art = _Artifacts(results_dir)
    report = ValidationReport()
    for rec in truth.get("assertions", []):
        try:
            result = _check(rec, art, truth)
        except DataError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            result = AssertionResult(
                rec.get("name", rec.get("kind", "?")), rec.get("kind", "?"),
                False, None, rec.get("expected"), note=f"evaluation error: {exc}",
            )
        report.results.append(result)
    return report
