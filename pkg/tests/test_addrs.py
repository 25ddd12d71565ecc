import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipactivity import addrs
from ipactivity.errors import DataError


def test_ip_to_int_examples():
    assert addrs.ip_to_int("0.0.0.0") == 0
    assert addrs.ip_to_int("255.255.255.255") == 2**32 - 1
    assert addrs.ip_to_int("10.1.2.3") == (10 << 24) | (1 << 16) | (2 << 8) | 3


@pytest.mark.parametrize(
    "bad",
    ["10.0.0", "10.0.0.0.0", "10.0.0.256", "01.2.3.4", "a.b.c.d", "", "10..0.1", " 10.0.0.1"],
)
def test_ip_to_int_rejects_malformed(bad):
    with pytest.raises(DataError):
        addrs.ip_to_int(bad)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_ip_round_trip(value):
    assert addrs.ip_to_int(addrs.int_to_ip(value)) == value


def test_block_helpers():
    ip = addrs.ip_to_int("192.0.2.200")
    block = addrs.block_of(ip)
    assert addrs.block_base(block) == addrs.ip_to_int("192.0.2.0")
    assert addrs.block_to_str(block) == "192.0.2.0/24"


def test_parse_prefix():
    assert addrs.parse_prefix("10.0.0.0/8") == (10 << 24, 8)
    assert addrs.parse_prefix("192.0.2.128/25") == (addrs.ip_to_int("192.0.2.128"), 25)
    assert addrs.parse_prefix("1.2.3.4/32") == (addrs.ip_to_int("1.2.3.4"), 32)


@pytest.mark.parametrize("bad", ["10.0.0.0", "10.0.0.0/33", "10.0.0.1/24", "10.0.0.0/-1", "10.0.0.0/"])
def test_parse_prefix_rejects(bad):
    with pytest.raises(DataError):
        addrs.parse_prefix(bad)


def test_prefix_range():
    lo, hi = addrs.prefix_range(addrs.ip_to_int("10.0.0.77"), 24)
    assert lo == addrs.ip_to_int("10.0.0.0")
    assert hi == addrs.ip_to_int("10.0.0.255")
    assert addrs.prefix_range(7, 32) == (7, 7)
    assert addrs.prefix_range(12345, 0) == (0, 2**32 - 1)


@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=0, max_value=32))
def test_prefix_range_contains_address(addr, plen):
    lo, hi = addrs.prefix_range(addr, plen)
    assert lo <= addr <= hi
    assert hi - lo + 1 == 1 << (32 - plen)
    assert addrs.parse_prefix(addrs.prefix_to_str(lo, plen)) == (lo, plen)
