import hashlib
import os

import pytest

from ipactivity import output


def test_atomic_bytes_writes_and_cleans_up(tmp_path):
    target = tmp_path / "data.bin"
    output.atomic_bytes(target, b"\x00\x01")
    assert target.read_bytes() == b"\x00\x01"
    output.atomic_bytes(target, b"replaced")
    assert target.read_bytes() == b"replaced"
    leftovers = [n for n in os.listdir(tmp_path) if n.startswith(".tmp-")]
    assert leftovers == []


def test_atomic_text_round_trip(tmp_path):
    target = tmp_path / "note.txt"
    output.atomic_text(target, "héllo\n")
    assert target.read_text(encoding="utf-8") == "héllo\n"


def test_format_value():
    assert output.format_value(None) == ""
    assert output.format_value(True) == "true"
    assert output.format_value(False) == "false"
    assert output.format_value(0.25) == "0.25"
    assert output.format_value(1 / 3) == "0.3333333333"
    assert output.format_value(7) == "7"
    assert output.format_value("x") == "x"


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rows = [("10.0.0.1", 3, 0.5, None), ("10.0.0.2", 4, 1.0, True)]
    output.write_csv(path, ("addr", "n", "frac", "flag"), rows, plot="demo")
    text = path.read_text()
    assert text.startswith("# plot: demo\naddr,n,frac,flag\n")
    cols, back = output.read_csv(path)
    assert cols == ["addr", "n", "frac", "flag"]
    assert back[0] == {"addr": "10.0.0.1", "n": "3", "frac": "0.5", "flag": ""}
    assert back[1]["flag"] == "true"


def test_read_csv_requires_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# plot: nothing\n")
    with pytest.raises(ValueError):
        output.read_csv(path)


def test_write_json_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    output.write_json(a, {"z": 1, "a": [1.5, None, True]})
    output.write_json(b, {"a": [1.5, None, True], "z": 1})
    assert a.read_bytes() == b.read_bytes()
    assert output.read_json(a) == {"z": 1, "a": [1.5, None, True]}
    assert a.read_text().endswith("\n")


def test_sha256_of(tmp_path):
    path = tmp_path / "payload"
    path.write_bytes(b"abc" * 100_000)
    assert output.sha256_of(path) == hashlib.sha256(b"abc" * 100_000).hexdigest()
