import datetime
import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipactivity.errors import DataError, IngestError
from ipactivity.store import (
    BLOCK_SIZE,
    ActivityMatrix,
    ActivityStore,
    DayRange,
    UASampleSet,
    ingest_activity,
    ingest_ua_samples,
    parse_day,
)
from util import build_store


def test_day_range_basics():
    dr = DayRange("2015-01-05", 7)
    assert dr.first_day == datetime.date(2015, 1, 5)
    assert dr.date_of(6) == datetime.date(2015, 1, 11)
    assert dr.index_of(datetime.date(2015, 1, 7)) == 2
    with pytest.raises(ValueError):
        dr.index_of(datetime.date(2015, 1, 12))
    with pytest.raises(DataError):
        DayRange("2015-01-05", 0)


def test_parse_day_rejects_sloppy_dates():
    assert parse_day("2015-02-28") == datetime.date(2015, 2, 28)
    for bad in ("2015-2-28", "2015-02-30", "20150228", "2015/02/28"):
        with pytest.raises(DataError):
            parse_day(bad)


def test_ingest_builds_expected_matrix():
    store = build_store(
        [(0, "10.0.0.1", 5), (0, "10.0.0.9", 2), (3, "10.0.0.1", 7), (1, "10.9.0.40", 1)],
        days=7,
    )
    assert store.n_blocks == 2
    m = store.get(10 << 16)
    assert m.hits[1, 0] == 5 and m.hits[1, 3] == 7 and m.hits[9, 0] == 2
    assert m.active[1, 0] and not m.active[1, 1]
    assert store.daily_active_counts().tolist() == [2, 1, 0, 1, 0, 0, 0]
    assert store.total_hits() == 15


def test_ingest_sums_duplicate_cells():
    store = build_store([(2, "10.0.0.1", 3), (2, "10.0.0.1", 4)], days=7)
    assert store.get(10 << 16).hits[1, 2] == 7
    assert store.stats.records == 2
    assert store.stats.distinct_cells == 1


def test_ingest_saturates_instead_of_wrapping():
    top = 2**32 - 1
    store = build_store([(0, "10.0.0.1", top), (0, "10.0.0.1", top)], days=3)
    assert store.get(10 << 16).hits[1, 0] == top
    assert store.stats.saturated_cells == 1
    assert store.stats.hits_parsed == 2 * top
    assert store.stats.hits_stored == top


def test_strict_ingest_raises_with_line_number():
    dr = DayRange("2015-01-05", 7)
    lines = ["2015-01-05,10.0.0.1,3\n", "2015-01-05,10.0.0.777,3\n"]
    with pytest.raises(IngestError) as err:
        ingest_activity(lines, dr)
    assert err.value.line == 2


def test_tolerant_ingest_counts_skips():
    dr = DayRange("2015-01-05", 7)
    lines = ["garbage\n", "2015-01-05,10.0.0.1,3\n", "also,garbage\n"]
    store = ingest_activity(lines, dr, strict=False)
    assert store.stats.skipped == 2
    assert store.stats.records == 1
    assert store.stats.lines == 3


def test_out_of_range_date_fails_even_tolerant():
    dr = DayRange("2015-01-05", 7)
    lines = ["2015-01-05,10.0.0.1,3\n", "2015-02-01,10.0.0.1,3\n"]
    with pytest.raises(IngestError) as err:
        ingest_activity(lines, dr, strict=False)
    assert err.value.line == 2


def test_ingest_reads_gzip_by_magic(tmp_path):
    path = tmp_path / "activity.csv.gz"
    with gzip.open(path, "wb") as f:
        f.write(b"2015-01-05,10.0.0.1,3\n")
    store = ingest_activity(str(path), DayRange("2015-01-05", 2))
    assert store.n_blocks == 1


def test_save_load_round_trip(tmp_path):
    store = build_store(
        [(0, "10.0.0.1", 5), (6, "10.0.0.255", 2**32 - 1), (3, "172.16.3.7", 12)],
        days=7,
    )
    path = tmp_path / "a.ipact"
    store.save(path)
    again = ActivityStore.load(path)
    assert again == store
    assert again.day_range == store.day_range
    # a second save produces identical bytes
    path2 = tmp_path / "b.ipact"
    again.save(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "bogus.ipact"
    path.write_bytes(b"NOTASTORE" + b"\x00" * 64)
    with pytest.raises(DataError):
        ActivityStore.load(path)


def test_window_queries():
    store = build_store(
        [(0, "10.0.0.1", 1), (2, "10.0.0.2", 1), (5, "10.0.0.3", 1)],
        days=7,
    )
    m = store.get(10 << 16)
    w = m.window_active(0, 2)
    assert w[1] and w[2] and not w[3]
    u = m.window_union([(0, 2), (3, 6)])
    assert u.shape == (BLOCK_SIZE, 2)
    assert u[3, 1] and not u[3, 0]
    assert sorted(store.active_set(0, 2).tolist()) == [(10 << 24) + 1, (10 << 24) + 2]
    assert store.active_block_ids(3, 6).tolist() == [10 << 16]


def test_matrix_rejects_bad_shape():
    with pytest.raises(ValueError):
        ActivityMatrix(1, np.zeros((8, 3), np.uint32))


def test_ua_samples_window_counts():
    dr = DayRange("2015-01-05", 7)
    lines = [
        '2015-01-05,10.0.0.1,"agent one"\n',
        '2015-01-06,10.0.0.1,"agent one"\n',
        '2015-01-06,10.0.0.2,"agent, with comma"\n',
        '2015-01-10,10.0.9.1,"other"\n',
    ]
    ua = ingest_ua_samples(lines, dr)
    assert ua.window_counts(10 << 16, 0, 6) == (3, 2)
    assert ua.window_counts(10 << 16, 0, 0) == (1, 1)
    assert ua.window_counts((10 << 16) + 9, 0, 6) == (1, 1)
    assert ua.window_counts(99, 0, 6) == (0, 0)


def test_ua_samples_reject_bad_rows():
    dr = DayRange("2015-01-05", 7)
    with pytest.raises(IngestError):
        ingest_ua_samples(["2015-01-05,10.0.0.1\n"], dr)
    ua = ingest_ua_samples(["2015-01-05,10.0.0.1\n"], dr, strict=False)
    assert ua.sample_count() == 0


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=9),
            st.integers(min_value=0, max_value=1023),
            st.integers(min_value=1, max_value=50),
        ),
        max_size=60,
    )
)
def test_ingest_matches_dict_oracle(records):
    """The sealed matrices agree with a plain dict accumulation."""
    dr = DayRange("2015-01-05", 10)
    rows = [(d, f"10.0.{a >> 8}.{a & 255}", h) for d, a, h in records]
    store = build_store(rows, days=10)
    oracle: dict[tuple[int, int], int] = {}
    for d, a, h in records:
        ip = (10 << 24) + a
        oracle[(ip, d)] = min(oracle.get((ip, d), 0) + h, 2**32 - 1)
    got = {}
    for m in store:
        for row, day in zip(*np.nonzero(m.hits)):
            got[((m.block << 8) + int(row), int(day))] = int(m.hits[row, day])
    assert got == oracle
