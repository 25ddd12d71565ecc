import numpy as np
import pytest

from ipactivity import traffic
from ipactivity.errors import DataError
from ipactivity.store import DayRange, ingest_ua_samples
from util import build_store


def test_nearest_rank_percentiles():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    assert traffic.nearest_rank(vals, 50) == 2.0  # rank ceil(0.5*4)=2
    assert traffic.nearest_rank(vals, 51) == 3.0
    assert traffic.nearest_rank(vals, 1) == 1.0   # rank floor clamps to 1
    assert traffic.nearest_rank(vals, 100) == 4.0
    assert traffic.nearest_rank(np.array([1.0, 9.0]), 50) == 1.0
    with pytest.raises(ValueError):
        traffic.nearest_rank(np.array([]), 50)


def test_bin_by_days_active_median():
    rows = [(0, "10.0.0.1", 10), (1, "10.0.0.1", 20), (2, "10.0.0.1", 30)]
    rows += [(0, "10.0.0.2", 7)]
    store = build_store(rows, days=3)
    bins = traffic.bin_by_days_active(store)
    assert bins.stat == "median"
    assert bins.counts.tolist() == [0, 1, 0, 1]  # one 1-day, one 3-day address
    assert bins.total_hits.tolist() == [0, 7, 0, 60]
    assert bins.percentiles[3][2] == 20.0  # median daily hits of the 3-day address
    assert bins.percentiles[1][2] == 7.0
    assert np.isnan(bins.percentiles[2]).all()
    assert bins.total_addresses == 2
    assert bins.grand_total_hits == 67


def test_bin_by_days_active_mean():
    rows = [(0, "10.0.0.1", 10), (1, "10.0.0.1", 11)]
    store = build_store(rows, days=3)
    bins = traffic.bin_by_days_active(store, stat="mean")
    assert bins.percentiles[2][2] == pytest.approx(10.5)
    with pytest.raises(ValueError):
        traffic.bin_by_days_active(store, stat="max")


def test_median_is_lower_of_even_count():
    rows = [(0, "10.0.0.1", 1), (1, "10.0.0.1", 9)]
    store = build_store(rows, days=2)
    bins = traffic.bin_by_days_active(store)
    assert bins.percentiles[2][2] == 1.0


def test_cumulative_shares():
    rows = [(0, "10.0.0.1", 7), (0, "10.0.0.2", 20), (1, "10.0.0.2", 40)]
    store = build_store(rows, days=2)
    shares = traffic.cumulative_shares(traffic.bin_by_days_active(store))
    assert shares[0] == (1, pytest.approx(0.5), pytest.approx(7 / 67))
    assert shares[-1] == (2, pytest.approx(1.0), pytest.approx(1.0))
    with pytest.raises(DataError):
        traffic.cumulative_shares(
            traffic.bin_by_days_active(build_store([], days=2))
        )


def test_top_decile_share_exact_tenth():
    rows = [(0, f"10.0.0.{a}", a) for a in range(1, 11)]  # hits 1..10
    store = build_store(rows, days=2)
    shares = traffic.top_decile_share(store, [(0, 1)])
    assert shares == [pytest.approx(10 / 55)]


def test_top_decile_tie_prefers_lowest_address():
    rows = [(0, f"10.0.0.{a}", 5) for a in range(10)]
    store = build_store(rows, days=1)
    # all tied at 5; the decile is exactly one address and the share 1/10
    assert traffic.top_decile_share(store, [(0, 0)]) == [pytest.approx(0.1)]


def test_top_decile_rounds_up():
    rows = [(0, f"10.0.0.{a}", 1) for a in range(11)]
    rows[0] = (0, "10.0.0.0", 90)
    store = build_store(rows, days=1)
    # 11 actives -> decile size 2: the 90 plus one 1
    assert traffic.top_decile_share(store, [(0, 0)]) == [pytest.approx(91 / 100)]


def test_top_decile_scale_invariance():
    rows = [(0, f"10.0.0.{a}", a + 1) for a in range(10)]
    small = build_store(rows, days=1)
    big = build_store([(d, ip, h * 1000) for d, ip, h in rows], days=1)
    assert traffic.top_decile_share(small, [(0, 0)]) == traffic.top_decile_share(big, [(0, 0)])


def test_top_decile_requires_activity():
    store = build_store([(0, "10.0.0.1", 1)], days=4)
    with pytest.raises(DataError):
        traffic.top_decile_share(store, [(2, 3)])


def test_host_density_and_regions():
    store = build_store([(d, "10.0.0.1", 50) for d in range(7)], days=7)
    dr = DayRange("2015-01-05", 7)
    lines = [f'2015-01-0{5 + d % 3},10.0.0.1,"agent {i % 40}"\n' for i, d in enumerate(range(200))]
    ua = ingest_ua_samples(lines, dr)
    records = traffic.host_density(store, ua)
    assert len(records) == 1
    rec = records[0]
    assert rec.block == 10 << 16
    assert rec.sample_count == 200
    assert rec.distinct_ua == 40
    assert traffic.classify_density_region(rec) == "gateway"  # 40/200 = 0.2


def test_density_region_thresholds():
    mk = traffic.HostDensityRecord
    block = 10 << 16
    assert traffic.classify_density_region(mk(block, 99, 1)) == "other"  # too few samples
    assert traffic.classify_density_region(mk(block, 100, 1)) == "bot"   # 0.01 exactly
    assert traffic.classify_density_region(mk(block, 100, 2)) == "other"
    assert traffic.classify_density_region(mk(block, 100, 20)) == "gateway"
    assert traffic.classify_density_region(mk(block, 100, 19)) == "other"
    assert traffic.classify_density_region(mk(block, 1000, 1), min_samples=2000) == "other"


def test_host_density_includes_sampleless_active_blocks():
    store = build_store([(0, "10.0.0.1", 1), (0, "10.9.0.1", 1)], days=2)
    ua = ingest_ua_samples(['2015-01-05,10.0.0.1,"x"\n'], DayRange("2015-01-05", 2))
    records = traffic.host_density(store, ua)
    by_block = {r.block: (r.sample_count, r.distinct_ua) for r in records}
    assert by_block[(10 << 16) + (9 << 8)] == (0, 0)
