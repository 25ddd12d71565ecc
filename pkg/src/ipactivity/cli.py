"""Command-line entry point for the address-activity toolkit.

One binary, nine subcommands: ingest seals raw activity CSV into the binary
store; churn, blocks, traffic, and demographics compute the analysis
artifacts; compare produces the two-source visibility split; simulate
generates synthetic bundles with ground truth; validate checks analysis
outputs against that ground truth; report writes a hashed index of an output
directory.

All outputs are written atomically and deterministically: identical inputs
and configuration reproduce identical bytes. A TOML config file can preload
any flag default (top-level keys or per-subcommand tables); explicit flags
win over the file. The default output directory comes from the
IPACTIVITY_OUT environment variable when set.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, addrs, blocks, churn, demographics, routing, synth, traffic, validate
from .errors import DataError
from .output import (
    BLOCK_METRICS_COLUMNS,
    DAYS_ACTIVE_COLUMNS,
    EVENTS_COLUMNS,
    HOST_DENSITY_COLUMNS,
    MASK_HISTOGRAM_COLUMNS,
    TOP_DECILE_COLUMNS,
    sha256_of,
    write_csv,
    write_json,
)
from .store import ActivityStore, DayRange, ingest_activity, ingest_ua_samples, parse_day

log = logging.getLogger(__name__)

DEFAULT_WINDOWS = "1,2,4,7,14,28"

# Flags that never enter the config echo: they name machines or locations,
# not analysis parameters, so excluding them keeps reruns byte-identical.
ECHO_EXCLUDE = {"command", "config", "out", "verbose", "func"}


def _parse_windows(text: str) -> list[int]:
    try:
        sizes = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise DataError(f"bad window list {text!r}") from None
    if not sizes or any(w < 1 for w in sizes):
        raise DataError(f"bad window list {text!r}")
    return sizes


def _parse_span(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise DataError(f"bad day span {text!r}, expected LO:HI")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise DataError(f"bad day span {text!r}") from None


def _out_dir(args) -> str:
    out = args.out or os.environ.get("IPACTIVITY_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(args, out: str):
    doc = {k: v for k, v in sorted(vars(args).items()) if k not in ECHO_EXCLUDE}
    for k, v in doc.items():
        if isinstance(v, datetime.date):
            doc[k] = v.isoformat()
    write_json(os.path.join(out, f"{args.command}_config.json"), doc)


def _load_store(path) -> ActivityStore:
    if not os.path.exists(path):
        raise DataError(f"store {path} does not exist")
    return ActivityStore.load(path)


def _load_snapshots(args, day_range: DayRange):
    if not args.routing:
        return None
    snaps = routing.load_snapshot_dir(args.routing, day_range)
    if not snaps:
        raise DataError(f"no routing snapshots inside the period in {args.routing}")
    return snaps


# -- subcommands -------------------------------------------------------------------


def _cmd_ingest(args) -> int:
    out = _out_dir(args)
    day_range = DayRange(args.first_day, args.days)
    store = ingest_activity(args.activity, day_range, strict=not args.tolerant)
    store_path = args.store or os.path.join(out, "activity.ipact")
    store.save(store_path)
    stats = store.stats.as_dict() if store.stats else {}
    stats.update(
        first_day=day_range.first_day.isoformat(),
        days=day_range.days,
        blocks=store.n_blocks,
    )
    write_json(os.path.join(out, "ingest_stats.json"), stats)
    _echo_config(args, out)
    log.info("sealed %d blocks, %d records into %s", store.n_blocks, stats.get("records", 0), store_path)
    return 0


def _window_suffix(sizes: list[int], w: int) -> str:
    return "" if len(sizes) == 1 else f"_w{w}"


def _cmd_churn(args) -> int:
    out = _out_dir(args)
    store = _load_store(args.store)
    sizes = _parse_windows(args.windows)
    snapshots = _load_snapshots(args, store.day_range)
    summary: dict = {"windows": {}}

    for w in sizes:
        spec = churn.make_windows(store.day_range.days, w)
        if len(spec) < 2:
            log.warning("window size %d leaves fewer than two windows; skipped", w)
            continue
        sfx = _window_suffix(sizes, w)
        events, stats = churn.detect_events(store, spec)
        churn.tag_events(events, store, spec, mask_floor=args.mask_floor)
        if snapshots is not None:
            _annotate_bgp(events, spec, snapshots)
        write_csv(
            os.path.join(out, f"events{sfx}.csv"),
            EVENTS_COLUMNS,
            (
                (addrs.int_to_ip(e.address), e.kind, e.window_index, e.tagged_mask, e.bgp_class)
                for e in events
            ),
            plot="up and down events per window boundary",
        )
        write_csv(
            os.path.join(out, f"mask_histogram{sfx}.csv"),
            MASK_HISTOGRAM_COLUMNS,
            churn.mask_histogram(events),
            plot="event counts by tagged prefix mask",
        )
        diffs = churn.long_term_diff(store, spec, snapshots)
        write_csv(
            os.path.join(out, f"long_term_diff{sfx}.csv"),
            ("window_index", "appear", "disappear",
             "appear_whole_block_frac", "disappear_whole_block_frac"),
            (
                (d.window_index, d.appear, d.disappear,
                 d.appear_whole_block_frac, d.disappear_whole_block_frac)
                for d in diffs
            ),
            plot="address set drift against the first window",
        )
        flow_ok = all(
            b.size_after - b.size_before == b.up_count - b.down_count for b in stats.boundaries
        )
        summary["windows"][str(w)] = {
            "summary": stats.summary,
            "flow_identity_ok": flow_ok,
            "boundaries": [
                {
                    "boundary": b.boundary,
                    "up_count": b.up_count,
                    "down_count": b.down_count,
                    "size_before": b.size_before,
                    "size_after": b.size_after,
                    "up_pct": b.up_pct,
                    "down_pct": b.down_pct,
                }
                for b in stats.boundaries
            ],
        }

    if snapshots is not None:
        as_window = args.as_window if args.as_window in sizes else sizes[0]
        spec = churn.make_windows(store.day_range.days, as_window)
        if len(spec) >= 2:
            per_as = churn.per_as_churn(
                store, spec, snapshots, min_actives=args.min_actives, mapping=args.as_mapping
            )
            write_csv(
                os.path.join(out, "per_as_churn.csv"),
                ("asn", "active_addrs", "up_median_pct", "down_median_pct"),
                (
                    (r.asn, r.active_addrs, r.up_median_pct, r.down_median_pct)
                    for r in per_as.rows
                ),
                plot="median churn per autonomous system",
            )
            summary["per_as"] = {
                "window": as_window,
                "mapping": args.as_mapping,
                "min_actives": args.min_actives,
                "up_cdf": per_as.up_cdf,
                "down_cdf": per_as.down_cdf,
            }

    daily = store.daily_active_counts()
    write_csv(
        os.path.join(out, "daily_actives.csv"),
        ("day_index", "date", "active_addresses"),
        (
            (d, store.day_range.date_of(d).isoformat(), int(daily[d]))
            for d in range(store.day_range.days)
        ),
        plot="daily count of active addresses",
    )
    write_json(os.path.join(out, "churn_summary.json"), summary)
    _echo_config(args, out)
    return 0


def _annotate_bgp(events, spec, snapshots):
    by_boundary: dict[int, list] = {}
    for e in events:
        by_boundary.setdefault(e.window_index, []).append(e)
    for i, group in by_boundary.items():
        ips = np.array([e.address for e in group], np.uint32)
        classes = routing.classify_many(ips, snapshots, spec.windows[i], spec.windows[i + 1])
        for e, c in zip(group, classes):
            e.bgp_class = c


def _cmd_blocks(args) -> int:
    out = _out_dir(args)
    store = _load_store(args.store)
    ptrs = blocks.PtrRecordSet.load(args.ptr) if args.ptr else None
    config = blocks.ChangeClassifierConfig(threshold=args.change_threshold, month_days=args.month_days)
    metrics = blocks.compute_block_metrics(
        store,
        ptrs,
        change_config=config,
        min_classified=args.min_classified,
        consistency=args.consistency,
    )
    write_csv(
        os.path.join(out, "block_metrics.csv"),
        BLOCK_METRICS_COLUMNS,
        (
            (
                addrs.block_to_str(m.block),
                m.fd,
                m.stu,
                ";".join("%.10g" % v for v in m.monthly_stu),
                m.max_delta_stu,
                m.change_class,
                m.assignment_tag,
            )
            for m in metrics
        ),
        plot="per-block filling degree and utilization metrics",
    )
    subsets = ("all", "static", "dynamic") if ptrs is not None else ("all",)
    cdf_rows = []
    for subset in subsets:
        dist = blocks.fd_distribution(metrics, subset)
        cdf_rows.extend((subset, fd, frac) for fd, frac in dist.points)
    write_csv(
        os.path.join(out, "fd_cdf.csv"),
        ("subset", "fd", "cumulative_fraction"),
        cdf_rows,
        plot="cumulative distribution of filling degree",
    )
    hist = blocks.utilization_histogram(metrics, fd_floor=args.fd_floor)
    write_csv(
        os.path.join(out, "stu_histogram.csv"),
        ("bin_low", "bin_high", "blocks"),
        (
            (i * 0.05, (i + 1) * 0.05, hist.counts[i])
            for i in range(blocks.STU_HISTOGRAM_BINS)
        ),
        plot="utilization histogram of highly filled blocks",
    )
    write_json(os.path.join(out, "potential_utilization.json"), blocks.potential_utilization_report(metrics))
    _echo_config(args, out)
    return 0


def _cmd_traffic(args) -> int:
    out = _out_dir(args)
    store = _load_store(args.store)
    bins = traffic.bin_by_days_active(store, stat=args.stat)
    shares = traffic.cumulative_shares(bins)
    rows = []
    for day, addr_share, hit_share in shares:
        pct = bins.percentiles[day]
        rows.append(
            (
                day,
                int(bins.counts[day]),
                int(bins.total_hits[day]),
                *(None if np.isnan(p) else float(p) for p in pct),
                addr_share,
                hit_share,
            )
        )
    write_csv(
        os.path.join(out, "days_active_bins.csv"),
        DAYS_ACTIVE_COLUMNS,
        rows,
        plot="addresses binned by days of activity",
    )
    w = args.window_days
    spans = [
        (lo, lo + w - 1) for lo in range(0, store.day_range.days - w + 1, w)
    ]
    if spans:
        trend = traffic.top_decile_share(store, spans)
        write_csv(
            os.path.join(out, "top_decile_trend.csv"),
            TOP_DECILE_COLUMNS,
            (
                (i, store.day_range.date_of(spans[i][0]).isoformat(), trend[i])
                for i in range(len(spans))
            ),
            plot="traffic share of the most active address decile",
        )
    if args.ua:
        samples = ingest_ua_samples(args.ua, store.day_range, strict=not args.tolerant)
        density = traffic.host_density(store, samples)
        write_csv(
            os.path.join(out, "host_density.csv"),
            HOST_DENSITY_COLUMNS,
            ((addrs.block_to_str(r.block), r.sample_count, r.distinct_ua) for r in density),
            plot="sample volume against distinct user agents per block",
        )
    _echo_config(args, out)
    return 0


def _cmd_demographics(args) -> int:
    out = _out_dir(args)
    store = _load_store(args.store)
    samples = ingest_ua_samples(args.ua, store.day_range, strict=not args.tolerant)
    t = store.day_range.days
    stu_by = {}
    hits_by = {}
    hosts_by = {}
    for m in store:
        stu_by[m.block] = blocks.stu(m)
        hits_by[m.block] = m.total_hits()
        hosts_by[m.block] = samples.window_counts(m.block, 0, t - 1)[1]
    features = demographics.normalize_features(stu_by, hits_by, hosts_by)
    cube = demographics.build_cube(features)
    write_json(
        os.path.join(out, "cube.json"),
        {
            "total": cube.total,
            "bins": demographics.CUBE_BINS,
            "axis_order": ["stu", "traffic", "hosts"],
            "counts": cube.flat(),
        },
    )
    if args.delegations:
        table = demographics.DelegationTable.load(args.delegations)
        groups = demographics.group_by_registry(features, table, key=args.group_key)
        rows = []
        for name, agg in groups.items():
            for i in range(demographics.CUBE_BINS):
                for j in range(demographics.CUBE_BINS):
                    n = int(agg.plane_counts[i, j])
                    if n == 0:
                        continue
                    rows.append(
                        (name, agg.blocks, i + 1, j + 1, n, float(agg.plane_hosts_mean[i, j]))
                    )
        write_csv(
            os.path.join(out, "per_rir.csv"),
            ("group", "group_blocks", "stu_bin", "traffic_bin", "blocks", "mean_hosts_norm"),
            rows,
            plot="per-registry utilization and traffic plane",
        )
    _echo_config(args, out)
    return 0


def _read_address_set(path) -> set[int]:
    out = set()
    with open(path, "r", encoding="utf-8") as f:
        for n, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.add(addrs.ip_to_int(line))
            except DataError:
                raise DataError(f"{path}:{n}: bad address {line!r}") from None
    return out


def _cmd_compare(args) -> int:
    out = _out_dir(args)
    set_a = _read_address_set(args.set_a)
    set_b = _read_address_set(args.set_b)
    snapshots = None
    window = None
    if args.granularity == "as":
        if not args.routing or not args.first_day or not args.days:
            raise DataError("AS-level comparison needs --routing, --first-day, and --days")
        day_range = DayRange(args.first_day, args.days)
        snapshots = _load_snapshots(args, day_range)
        window = _parse_span(args.window) if args.window else (0, day_range.days - 1)
    only_a, both, only_b = demographics.compare_sources(
        set_a, set_b, args.granularity, snapshots=snapshots, window=window
    )
    write_csv(
        os.path.join(out, "visibility.csv"),
        ("granularity", "only_a", "both", "only_b"),
        [(args.granularity, only_a, both, only_b)],
        plot="two-source visibility of active addresses",
    )
    _echo_config(args, out)
    return 0


def _preset_path(name: str) -> str:
    from importlib.resources import files

    base = files("ipactivity.presets")
    candidate = base / f"{name}.toml"
    if not candidate.is_file():
        known = sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".toml"))
        raise DataError(f"unknown preset {name!r}; available: {', '.join(known)}")
    return str(candidate)


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    if bool(args.spec) == bool(args.preset):
        raise DataError("simulate needs exactly one of --spec or --preset")
    path = args.spec or _preset_path(args.preset)
    spec = synth.ScenarioSpec.from_toml(path)
    if args.seed is not None:
        spec.seed = args.seed
        spec.validate()
    truth = synth.generate(spec, out)
    log.info(
        "generated %d blocks over %d days into %s (%d assertions)",
        len(spec.blocks), spec.days, out, len(truth["assertions"]),
    )
    _echo_config(args, out)
    return 0


def _cmd_validate(args) -> int:
    truth_path = args.truth or os.path.join(args.results, "ground_truth.json")
    if not os.path.exists(truth_path):
        raise DataError(f"ground truth file {truth_path} does not exist")
    with open(truth_path, "r", encoding="utf-8") as f:
        truth = json.load(f)
    report = validate.run_assertions(truth, args.results)
    for result in report.results:
        print(result.line())
    print(f"{report.passed} passed, {report.failed} failed")
    write_json(os.path.join(args.results, "validation_report.json"), report.as_dict())
    return 0 if report.ok else 1


def _cmd_report(args) -> int:
    target = args.dir or _out_dir(args)
    if not os.path.isdir(target):
        raise DataError(f"{target} is not a directory")
    artifacts = []
    for root, dirs, names in os.walk(target):
        dirs.sort()
        for name in sorted(names):
            rel = os.path.relpath(os.path.join(root, name), target)
            if rel == "index.json" or name.startswith(".tmp-"):
                continue
            full = os.path.join(root, name)
            artifacts.append(
                {"path": rel.replace(os.sep, "/"), "bytes": os.path.getsize(full), "sha256": sha256_of(full)}
            )
    write_json(
        os.path.join(target, "index.json"),
        {
            "tool": {"name": "ipactivity", "version": __version__},
            "artifact_count": len(artifacts),
            "artifacts": artifacts,
        },
    )
    log.info("indexed %d artifacts under %s", len(artifacts), target)
    return 0


# -- parser ------------------------------------------------------------------------


def _add_out(p):
    p.add_argument("--out", "-o", help="output directory (default: $IPACTIVITY_OUT or .)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="ipactivity",
        description="Spatio-temporal analysis of IPv4 address activity logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="TOML file preloading flag defaults (flags win)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="increase log detail")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    table: dict[str, argparse.ArgumentParser] = {}

    p = table["ingest"] = sub.add_parser("ingest", help="seal activity CSV into a binary store")
    p.add_argument("--activity", required=True, help="activity CSV path (gzip detected)")
    p.add_argument("--first-day", required=True, type=parse_day, help="first day, YYYY-MM-DD")
    p.add_argument("--days", required=True, type=int, help="period length in days")
    p.add_argument("--store", help="store file path (default: <out>/activity.ipact)")
    p.add_argument("--tolerant", action="store_true",
                   help="skip malformed lines instead of failing (counts them)")
    _add_out(p)
    p.set_defaults(func=_cmd_ingest)

    p = table["churn"] = sub.add_parser("churn", help="window churn, events, mask tags")
    p.add_argument("--store", required=True, help="sealed store path")
    p.add_argument("--windows", default=DEFAULT_WINDOWS,
                   help=f"comma-separated window sizes in days (default {DEFAULT_WINDOWS})")
    p.add_argument("--mask-floor", type=int, default=churn.DEFAULT_MASK_FLOOR,
                   help="largest enclosing prefix considered when tagging (default %(default)s)")
    p.add_argument("--routing", help="directory of daily routing snapshots named YYYY-MM-DD.csv")
    p.add_argument("--as-window", type=int, default=7,
                   help="window size for the per-AS churn table (default %(default)s)")
    p.add_argument("--as-mapping", choices=("per-window", "period"), default="per-window",
                   help="address-to-AS mapping scope for per-AS churn (default %(default)s)")
    p.add_argument("--min-actives", type=int, default=churn.DEFAULT_MIN_ACTIVES,
                   help="per-AS eligibility floor on distinct active addresses (default %(default)s)")
    _add_out(p)
    p.set_defaults(func=_cmd_churn)

    p = table["blocks"] = sub.add_parser("blocks", help="per-/24 utilization metrics")
    p.add_argument("--store", required=True)
    p.add_argument("--ptr", help="PTR record CSV: <address>,<name>")
    p.add_argument("--month-days", type=int, default=blocks.MONTH_DAYS,
                   help="days per analysis month (default %(default)s)")
    p.add_argument("--change-threshold", type=float, default=blocks.DEFAULT_CHANGE_THRESHOLD,
                   help="major-change cut on |monthly STU delta| (default %(default)s)")
    p.add_argument("--min-classified", type=int, default=blocks.DEFAULT_MIN_CLASSIFIED,
                   help="PTR names needed before a block may take a tag (default %(default)s)")
    p.add_argument("--consistency", type=float, default=blocks.DEFAULT_CONSISTENCY,
                   help="share of classified names one tag must reach (default %(default)s)")
    p.add_argument("--fd-floor", type=int, default=blocks.DEFAULT_FD_FLOOR,
                   help="filling-degree cut for the utilization histogram (default %(default)s)")
    _add_out(p)
    p.set_defaults(func=_cmd_blocks)

    p = table["traffic"] = sub.add_parser("traffic", help="activity bins and traffic shares")
    p.add_argument("--store", required=True)
    p.add_argument("--ua", help="user-agent sample CSV: <date>,<address>,<string>")
    p.add_argument("--stat", choices=("median", "mean"), default="median",
                   help="per-address daily-hit summary statistic (default %(default)s)")
    p.add_argument("--window-days", type=int, default=7,
                   help="tiling window for the top-decile trend (default %(default)s)")
    p.add_argument("--tolerant", action="store_true", help="skip malformed UA lines")
    _add_out(p)
    p.set_defaults(func=_cmd_traffic)

    p = table["demographics"] = sub.add_parser("demographics", help="feature cube and registry split")
    p.add_argument("--store", required=True)
    p.add_argument("--ua", required=True, help="user-agent sample CSV")
    p.add_argument("--delegations", help="delegated-extended statistics file")
    p.add_argument("--group-key", choices=("registry", "country"), default="registry",
                   help="grouping key for the per-registry table (default %(default)s)")
    p.add_argument("--tolerant", action="store_true", help="skip malformed UA lines")
    _add_out(p)
    p.set_defaults(func=_cmd_demographics)

    p = table["compare"] = sub.add_parser("compare", help="two-source visibility split")
    p.add_argument("--set-a", required=True, help="first address list, one per line")
    p.add_argument("--set-b", required=True, help="second address list")
    p.add_argument("--granularity", choices=("ip", "slash24", "as"), default="ip")
    p.add_argument("--routing", help="routing snapshot directory (needed at granularity as)")
    p.add_argument("--first-day", type=parse_day, help="period start for snapshot indexing")
    p.add_argument("--days", type=int, help="period length for snapshot indexing")
    p.add_argument("--window", help="day span LO:HI for the AS mapping (default whole period)")
    _add_out(p)
    p.set_defaults(func=_cmd_compare)

    p = table["simulate"] = sub.add_parser("simulate", help="generate a synthetic bundle")
    p.add_argument("--spec", help="scenario TOML path")
    p.add_argument("--preset", help="name of a packaged scenario")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    _add_out(p)
    p.set_defaults(func=_cmd_simulate)

    p = table["validate"] = sub.add_parser("validate", help="check outputs against ground truth")
    p.add_argument("--results", required=True, help="directory holding analysis outputs")
    p.add_argument("--truth", help="ground truth JSON (default: <results>/ground_truth.json)")
    p.set_defaults(func=_cmd_validate)

    p = table["report"] = sub.add_parser("report", help="hashed index of an output directory")
    p.add_argument("--dir", help="directory to index (default: the output directory)")
    _add_out(p)
    p.set_defaults(func=_cmd_report)

    return parser, table


def _apply_config(path: str, table: dict[str, argparse.ArgumentParser]):
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    scalars = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    for name, sp in table.items():
        section = doc.get(name, {})
        merged = {**scalars, **(section if isinstance(section, dict) else {})}
        dests = {a.dest for a in sp._actions}
        known = {k.replace("-", "_"): v for k, v in merged.items()}
        known = {k: v for k, v in known.items() if k in dests}
        if "first_day" in known and isinstance(known["first_day"], str):
            known["first_day"] = parse_day(known["first_day"])
        sp.set_defaults(**known)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, table = build_parser()
    # Config preloading: find --config before the real parse so its values
    # become defaults; explicitly passed flags then win naturally.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    probe, _ = pre.parse_known_args(argv)
    try:
        if probe.config:
            _apply_config(probe.config, table)
        args = parser.parse_args(argv)
        level = logging.DEBUG if args.verbose else logging.INFO
        logging.basicConfig(
            level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
        )
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
