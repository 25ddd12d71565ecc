import pytest

from ipactivity import blocks
from ipactivity.errors import DataError
from util import build_store


def matrix_from(rows, days=56):
    store = build_store(rows, days=days)
    return store.get(10 << 16)


def test_filling_degree_and_stu():
    m = matrix_from([(0, "10.0.0.1", 3), (1, "10.0.0.1", 3), (0, "10.0.0.2", 1)], days=56)
    assert blocks.filling_degree(m) == 2
    assert blocks.active_cells(m) == 3
    assert blocks.stu(m) == pytest.approx(3 / (256 * 56))
    assert blocks.stu(m, 0, 0) == pytest.approx(2 / 256)
    assert blocks.filling_degree(m, 2, 55) == 0


def test_monthly_stu_splits_complete_months():
    rows = [(d, "10.0.0.1", 1) for d in range(28)]  # all of month one
    rows += [(d, "10.0.0.2", 1) for d in range(28, 42)]  # half of month two
    m = matrix_from(rows, days=60)  # 4 leftover days ignored
    series = blocks.monthly_stu(m)
    assert series == [pytest.approx(28 / (256 * 28)), pytest.approx(14 / (256 * 28))]


def test_detect_change_threshold_is_strict():
    # month 1: exactly 64 addresses active all 28 days -> STU 0.25; month 2: none
    m = matrix_from([(d, f"10.0.0.{a}", 1) for a in range(64) for d in range(28)], days=56)
    delta, cls = blocks.detect_change(m)
    assert delta == pytest.approx(-0.25)
    assert cls == "minor"  # |delta| must strictly exceed the threshold
    m2 = matrix_from([(d, f"10.0.0.{a}", 1) for a in range(65) for d in range(28)], days=56)
    delta2, cls2 = blocks.detect_change(m2)
    assert cls2 == "major"


def test_detect_change_earliest_tie_and_errors():
    # monthly series 1/256, 0, 1/256: the two deltas tie in magnitude and
    # the earlier boundary must win, keeping its negative sign
    rows = [(d, "10.0.0.1", 1) for d in range(28)]
    rows += [(d, "10.0.0.1", 1) for d in range(56, 84)]
    m = matrix_from(rows, days=84)
    delta, cls = blocks.detect_change(m)
    assert delta == pytest.approx(-1 / 256)
    assert cls == "minor"
    with pytest.raises(DataError):
        blocks.detect_change(matrix_from([(0, "10.0.0.1", 1)], days=28))


def test_classify_address():
    assert blocks.classify_address(b"host-1.static.example.net") == "static"
    assert blocks.classify_address(b"dsl.pool-7.example.net") == "dynamic"
    assert blocks.classify_address(b"dynamic-99.example.net") == "dynamic"
    assert blocks.classify_address(b"static.dynamic.example.net") == "conflicting"
    assert blocks.classify_address(b"mail.example.net") is None
    assert blocks.classify_address(None) is None


def test_classify_assignment_consistency_boundary():
    base = 10 << 24
    ptrs = blocks.PtrRecordSet()
    # 199 classified names: 180 static, 19 dynamic -> 180/199 > 0.9 -> static
    for off in range(180):
        ptrs.add(base + off, f"a{off}.static.example.net")
    for off in range(180, 199):
        ptrs.add(base + off, f"a{off}.pool.example.net")
    assert blocks.classify_assignment(10 << 16, ptrs) == "static"
    # one fewer static name drops below the 0.9 share -> unknown
    ptrs2 = blocks.PtrRecordSet()
    for off in range(179):
        ptrs2.add(base + off, f"a{off}.static.example.net")
    for off in range(179, 199):
        ptrs2.add(base + off, f"a{off}.pool.example.net")
    assert blocks.classify_assignment(10 << 16, ptrs2) == "unknown"


def test_classify_assignment_needs_enough_names():
    base = 10 << 24
    ptrs = blocks.PtrRecordSet()
    for off in range(15):
        ptrs.add(base + off, f"a{off}.static.example.net")
    assert blocks.classify_assignment(10 << 16, ptrs) == "unknown"
    ptrs.add(base + 15, "a15.static.example.net")
    assert blocks.classify_assignment(10 << 16, ptrs) == "static"


def test_classify_assignment_order_invariant():
    base = 10 << 24
    names = [(base + off, f"x{off}.dynamic.example.net") for off in range(40)]
    forward = blocks.PtrRecordSet()
    backward = blocks.PtrRecordSet()
    for ip, name in names:
        forward.add(ip, name)
    for ip, name in reversed(names):
        backward.add(ip, name)
    assert blocks.classify_assignment(10 << 16, forward) == blocks.classify_assignment(
        10 << 16, backward
    )


def test_ptr_load_and_lookup(tmp_path):
    path = tmp_path / "ptr.csv"
    path.write_text("10.0.0.1,one.static.example.net\n10.0.0.2,two.pool.example.net\n")
    ptrs = blocks.PtrRecordSet.load(str(path))
    assert len(ptrs) == 2
    assert ptrs.name((10 << 24) + 1) == b"one.static.example.net"
    assert ptrs.name((10 << 24) + 9) is None


def test_compute_block_metrics_end_to_end():
    rows = [(d, f"10.0.0.{a}", 2) for a in range(64) for d in range(28)]
    rows += [(d, f"10.0.0.{a}", 2) for a in range(200) for d in range(28, 56)]
    store = build_store(rows, days=56)
    ptrs = blocks.PtrRecordSet()
    for off in range(32):
        ptrs.add((10 << 24) + off, f"c{off}.static.example.net")
    metrics = blocks.compute_block_metrics(store, ptrs)
    assert len(metrics) == 1
    m = metrics[0]
    assert m.block == 10 << 16
    assert m.fd == 200
    assert m.stu == pytest.approx((64 * 28 + 200 * 28) / (256 * 56))
    assert m.monthly_stu == [pytest.approx(64 / 256), pytest.approx(200 / 256)]
    assert m.max_delta_stu == pytest.approx(136 / 256)
    assert m.change_class == "major"
    assert m.assignment_tag == "static"


def test_compute_block_metrics_without_months_or_ptrs():
    store = build_store([(d, "10.0.0.1", 1) for d in range(20)], days=20)
    (m,) = blocks.compute_block_metrics(store)
    assert m.monthly_stu == []
    assert m.max_delta_stu is None
    assert m.change_class is None
    assert m.assignment_tag == "unknown"


def test_fd_distribution_is_cumulative():
    rows = []
    for i, fd in enumerate((1, 1, 64, 250)):
        rows += [(0, f"10.0.{i}.{a}", 1) for a in range(fd)]
    store = build_store(rows, days=7)
    metrics = blocks.compute_block_metrics(store)
    dist = blocks.fd_distribution(metrics)
    points = dict(dist.points)
    assert dist.n_blocks == 4
    assert points[1] == pytest.approx(0.5)
    assert points[63] == pytest.approx(0.5)
    assert points[64] == pytest.approx(0.75)
    assert points[256] == pytest.approx(1.0)
    assert dist.fd_lt_64_share == pytest.approx(0.5)
    assert dist.fd_gt_250_share == pytest.approx(0.0)


def test_fd_distribution_subsets():
    rows = [(0, "10.0.0.1", 1), (0, "10.0.1.1", 1)]
    store = build_store(rows, days=7)
    ptrs = blocks.PtrRecordSet()
    for off in range(20):
        ptrs.add((10 << 24) + off, f"s{off}.static.example.net")
        ptrs.add((10 << 24) + (1 << 8) + off, f"d{off}.pool.example.net")
    metrics = blocks.compute_block_metrics(store, ptrs)
    assert blocks.fd_distribution(metrics, "static").n_blocks == 1
    assert blocks.fd_distribution(metrics, "dynamic").n_blocks == 1
    with pytest.raises(ValueError):
        blocks.fd_distribution(metrics, "bogus")


def test_utilization_histogram_gates_on_fd():
    rows = [(d, f"10.0.0.{a}", 1) for a in range(256) for d in range(0, 56, 2)]  # stu 0.5
    rows += [(0, "10.0.1.7", 1)]  # low fd, excluded
    store = build_store(rows, days=56)
    metrics = blocks.compute_block_metrics(store)
    hist = blocks.utilization_histogram(metrics)
    assert sum(hist.counts) == 1
    assert hist.counts[9] == 1  # stu 0.5 lands in bin (0.45, 0.5]


def test_potential_utilization_report():
    rows = [(d, f"10.0.0.{a}", 1) for a in range(256) for d in range(0, 56, 2)]
    rows += [(0, "10.0.1.7", 1)]
    store = build_store(rows, days=56)
    metrics = blocks.compute_block_metrics(store)
    report = blocks.potential_utilization_report(metrics)
    assert report["blocks"] == 2
    assert report["fd_lt_64_share"] == pytest.approx(0.5)
    assert report["fd_gt_250_share"] == pytest.approx(0.5)
    with pytest.raises(DataError):
        blocks.potential_utilization_report([])
