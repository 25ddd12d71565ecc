import json
import os

import jsonschema
import pytest

from ipactivity import cli
from ipactivity.output import read_csv, read_json

SCENARIO = """\
seed = 424242
first_day = 2015-01-05
days = 28

[[blocks]]
block = "10.0.0.0/24"
regime = "static_sparse"
subscribers = 40
p_weekday = 1.0
p_weekend = 1.0
hit_rate = 5.0
origin_as = 65001
naming = "static"
ua_strings = 4
ua_rate = 1

[[blocks]]
block = "10.0.1.0/24"
regime = "round_robin_pool"
subscribers = 46
pool = 256
lease_days = 7
hit_rate = 6.0
origin_as = 65002
naming = "dynamic"
ua_strings = 2
ua_rate = 1
"""


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    """One simulated dataset reused by every pipeline test in this module."""
    root = tmp_path_factory.mktemp("bundle")
    spec = root / "scenario.toml"
    spec.write_text(SCENARIO)
    data = root / "data"
    assert cli.main(["simulate", "--spec", str(spec), "--out", str(data)]) == 0
    store = root / "store"
    assert cli.main([
        "ingest", "--activity", str(data / "activity.csv"),
        "--first-day", "2015-01-05", "--days", "28",
        "--out", str(store),
    ]) == 0
    return {"root": root, "data": data, "store": store / "activity.ipact"}


def test_simulate_outputs(bundle):
    data = bundle["data"]
    for name in ("activity.csv", "ua.csv", "ptr.csv", "delegations.txt",
                 "scenario.json", "ground_truth.json"):
        assert (data / name).exists(), name
    assert (data / "routing" / "2015-01-05.csv").exists()


def test_ingest_stats(bundle):
    stats = read_json(bundle["store"].parent / "ingest_stats.json")
    assert stats["days"] == 28
    assert stats["first_day"] == "2015-01-05"
    assert stats["blocks"] == 2
    assert stats["skipped"] == 0


def test_churn_multi_window_naming(bundle, tmp_path):
    assert cli.main([
        "churn", "--store", str(bundle["store"]),
        "--windows", "7,14", "--out", str(tmp_path),
    ]) == 0
    names = sorted(os.listdir(tmp_path))
    assert "events_w7.csv" in names
    assert "events_w14.csv" in names
    assert "mask_histogram_w7.csv" in names
    assert "long_term_diff_w14.csv" in names
    assert "events.csv" not in names
    summary = read_json(tmp_path / "churn_summary.json")
    assert summary["windows"]["7"]["flow_identity_ok"] is True


def test_churn_single_window_unsuffixed(bundle, tmp_path):
    assert cli.main([
        "churn", "--store", str(bundle["store"]),
        "--windows", "7", "--out", str(tmp_path),
    ]) == 0
    names = sorted(os.listdir(tmp_path))
    assert "events.csv" in names
    assert "events_w7.csv" not in names


def test_churn_routing_annotation(bundle, tmp_path):
    assert cli.main([
        "churn", "--store", str(bundle["store"]),
        "--windows", "7", "--routing", str(bundle["data"] / "routing"),
        "--min-actives", "10", "--out", str(tmp_path),
    ]) == 0
    cols, rows = read_csv(tmp_path / "events.csv")
    assert cols == ["address", "kind", "boundary", "mask", "bgp_class"]
    assert rows, "expected churn events from the round robin block"
    assert all(r["bgp_class"] == "no_change" for r in rows)
    assert (tmp_path / "per_as_churn.csv").exists()


def test_blocks_outputs(bundle, tmp_path):
    assert cli.main([
        "blocks", "--store", str(bundle["store"]),
        "--ptr", str(bundle["data"] / "ptr.csv"), "--out", str(tmp_path),
    ]) == 0
    cols, rows = read_csv(tmp_path / "block_metrics.csv")
    by_block = {r["block"]: r for r in rows}
    assert by_block["10.0.0.0/24"]["fd"] == "40"
    assert by_block["10.0.0.0/24"]["assignment_tag"] == "static"
    assert by_block["10.0.1.0/24"]["assignment_tag"] == "dynamic"
    report = read_json(tmp_path / "potential_utilization.json")
    assert report["blocks"] == 2


def test_traffic_outputs(bundle, tmp_path):
    assert cli.main([
        "traffic", "--store", str(bundle["store"]),
        "--ua", str(bundle["data"] / "ua.csv"), "--out", str(tmp_path),
    ]) == 0
    _, bins = read_csv(tmp_path / "days_active_bins.csv")
    assert bins[-1]["cumulative_traffic_share"] == "1"
    _, trend = read_csv(tmp_path / "top_decile_trend.csv")
    assert len(trend) == 4  # 28 days in weekly spans
    assert (tmp_path / "host_density.csv").exists()


def test_demographics_outputs(bundle, tmp_path):
    assert cli.main([
        "demographics", "--store", str(bundle["store"]),
        "--ua", str(bundle["data"] / "ua.csv"),
        "--delegations", str(bundle["data"] / "delegations.txt"),
        "--out", str(tmp_path),
    ]) == 0
    cube = read_json(tmp_path / "cube.json")
    assert cube["total"] == 2
    assert sum(cube["counts"]) == 2
    assert cube["axis_order"] == ["stu", "traffic", "hosts"]
    assert (tmp_path / "per_rir.csv").exists()


def test_compare_round_trip(bundle, tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("# seen by the first vantage\n10.0.0.1\n10.0.0.2\n")
    b.write_text("10.0.0.2\n10.0.0.3\n")
    assert cli.main([
        "compare", "--set-a", str(a), "--set-b", str(b), "--out", str(tmp_path),
    ]) == 0
    _, rows = read_csv(tmp_path / "visibility.csv")
    assert rows[0]["only_a"] == "1"
    assert rows[0]["both"] == "1"
    assert rows[0]["only_b"] == "1"


def test_validate_pass_and_fail(bundle, tmp_path, capsys):
    results = tmp_path / "results"
    assert cli.main([
        "churn", "--store", str(bundle["store"]), "--out", str(results),
    ]) == 0
    assert cli.main([
        "blocks", "--store", str(bundle["store"]),
        "--ptr", str(bundle["data"] / "ptr.csv"), "--out", str(results),
    ]) == 0
    assert cli.main([
        "traffic", "--store", str(bundle["store"]),
        "--ua", str(bundle["data"] / "ua.csv"), "--out", str(results),
    ]) == 0
    assert cli.main([
        "demographics", "--store", str(bundle["store"]),
        "--ua", str(bundle["data"] / "ua.csv"),
        "--delegations", str(bundle["data"] / "delegations.txt"),
        "--out", str(results),
    ]) == 0
    rc = cli.main([
        "validate", "--results", str(results),
        "--truth", str(bundle["data"] / "ground_truth.json"),
    ])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "FAIL" not in out
    assert "passed, 0 failed" in out
    assert (results / "validation_report.json").exists()

    truth = read_json(bundle["data"] / "ground_truth.json")
    stu = [a for a in truth["assertions"] if a["kind"] == "block_stu"]
    assert stu
    stu[0]["expected"] = 9.9
    bad = tmp_path / "bad_truth.json"
    bad.write_text(json.dumps(truth))
    rc = cli.main(["validate", "--results", str(results), "--truth", str(bad)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL" in out
    report = read_json(results / "validation_report.json")
    assert report["failed"] == 1


def test_report_index_schema(bundle, tmp_path):
    results = tmp_path / "r"
    assert cli.main([
        "churn", "--store", str(bundle["store"]), "--windows", "7",
        "--out", str(results),
    ]) == 0
    assert cli.main(["report", "--dir", str(results), "--out", str(results)]) == 0
    index = read_json(results / "index.json")
    schema = {
        "type": "object",
        "required": ["tool", "artifact_count", "artifacts"],
        "properties": {
            "tool": {
                "type": "object",
                "required": ["name", "version"],
                "properties": {
                    "name": {"const": "ipactivity"},
                    "version": {"type": "string"},
                },
            },
            "artifact_count": {"type": "integer", "minimum": 1},
            "artifacts": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["path", "bytes", "sha256"],
                    "properties": {
                        "path": {"type": "string"},
                        "bytes": {"type": "integer", "minimum": 0},
                        "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                    },
                },
            },
        },
    }
    jsonschema.validate(index, schema)
    assert index["artifact_count"] == len(index["artifacts"])
    paths = [a["path"] for a in index["artifacts"]]
    assert "index.json" not in paths
    assert paths == sorted(paths)


def test_rerun_is_byte_identical(bundle, tmp_path):
    one, two = tmp_path / "one", tmp_path / "two"
    for out in (one, two):
        assert cli.main([
            "churn", "--store", str(bundle["store"]), "--windows", "7,28",
            "--out", str(out),
        ]) == 0
    for name in sorted(os.listdir(one)):
        assert (one / name).read_bytes() == (two / name).read_bytes(), name


def test_simulate_seed_override_changes_output(bundle, tmp_path):
    spec = bundle["root"] / "scenario.toml"
    alt = tmp_path / "alt"
    assert cli.main([
        "simulate", "--spec", str(spec), "--seed", "99", "--out", str(alt),
    ]) == 0
    scen = read_json(alt / "scenario.json")
    assert scen["seed"] == 99
    base = (bundle["data"] / "activity.csv").read_bytes()
    assert (alt / "activity.csv").read_bytes() != base


def test_unknown_preset_lists_available(tmp_path, capsys):
    rc = cli.main(["simulate", "--preset", "nonesuch", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 1
    assert "nonesuch" in err
    assert "regimes" in err


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["churn"])  # missing required --store
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["no-such-command"])
    assert e.value.code == 2


def test_missing_store_exits_1(tmp_path, capsys):
    rc = cli.main(["churn", "--store", str(tmp_path / "absent.ipact"),
                   "--out", str(tmp_path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_config_preload_and_flag_precedence(bundle, tmp_path):
    conf = tmp_path / "conf.toml"
    conf.write_text(
        'out = "%s"\n[churn]\nwindows = "7"\nmask_floor = 10\n' % tmp_path.as_posix()
    )
    assert cli.main([
        "--config", str(conf), "churn", "--store", str(bundle["store"]),
    ]) == 0
    names = os.listdir(tmp_path)
    assert "events.csv" in names  # single window from config, unsuffixed
    echo = read_json(tmp_path / "churn_config.json")
    assert echo["windows"] == "7"
    assert echo["mask_floor"] == 10
    for hidden in ("out", "config", "verbose", "command"):
        assert hidden not in echo

    override = tmp_path / "ovr"
    assert cli.main([
        "--config", str(conf), "churn", "--store", str(bundle["store"]),
        "--windows", "14", "--out", str(override),
    ]) == 0
    assert "events.csv" in os.listdir(override)
    echo = read_json(override / "churn_config.json")
    assert echo["windows"] == "14"
    assert echo["mask_floor"] == 10


def test_out_env_default(bundle, tmp_path, monkeypatch):
    monkeypatch.setenv("IPACTIVITY_OUT", str(tmp_path))
    assert cli.main([
        "churn", "--store", str(bundle["store"]), "--windows", "7",
    ]) == 0
    assert "events.csv" in os.listdir(tmp_path)
