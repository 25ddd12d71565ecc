"""Small builders shared across the test suite."""

from ipactivity.store import DayRange, ingest_activity


def day_range(days=7, first="2015-01-05"):
    return DayRange(first, days)


def build_store(rows, days=7, first="2015-01-05", strict=True):
    """Seal (day_index, dotted_quad, hits) triples into an ActivityStore."""
    dr = DayRange(first, days)
    lines = [f"{dr.date_of(d).isoformat()},{ip},{h}\n" for d, ip, h in rows]
    return ingest_activity(lines, dr, strict=strict)
