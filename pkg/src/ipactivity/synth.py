"""Deterministic synthetic workload generator with analytic ground truth.

Scenarios are described in a small TOML format: a seed, an observation
period, and a list of /24 block plans. Each plan names an addressing regime
(static_sparse, round_robin_pool, dynamic_24h_lease, dynamic_long_lease,
gateway, bot), traffic parameters, a PTR naming style, a routing origin, and
optional mid-period change and BGP events.

Every block draws from its own random stream, seeded by (scenario seed,
block id), so adding or removing a block never perturbs the others. Within a
block, draws are consumed in a fixed documented order per day: membership,
activity mask, hit counts, UA string indices. Identical (seed, spec) pairs
therefore produce byte-identical bundles.

Alongside the dataset the generator writes ground_truth.json: per-block
analytic expectations (closed-form mean and 3-sigma tolerance for the
spatio-temporal utilization, filling-degree ranges, assignment tags, change
classes) plus typed assertion records that the validation step can check
against analysis outputs.
"""

from __future__ import annotations

import datetime
import gzip
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import addrs
from .errors import DataError
from .output import atomic_bytes, write_json
from .store import parse_day

log = logging.getLogger(__name__)

REGIMES = (
    "static_sparse",
    "round_robin_pool",
    "dynamic_24h_lease",
    "dynamic_long_lease",
    "gateway",
    "bot",
)
NAMING_STYLES = ("static", "dynamic", "none")
CHANGE_KINDS = ("reconfiguration", "reallocation")
BGP_EVENTS = ("announce", "withdraw", "origin_change")
DECOY_PREFIX = "172.31.0.0/16"
DECOY_AS = 64999

CHURN_ZERO_WINDOWS = (1, 7, 28)


# -- scenario description --------------------------------------------------------


@dataclass(frozen=True)
class RegimeParams:
    regime: str
    subscribers: int = 1
    pool: int = 256
    lease_days: int = 1
    p_weekday: float = 1.0
    p_weekend: float = 1.0
    heavy_share: float = 0.3
    p_heavy: float = 0.95
    p_light: float = 0.25
    hit_rate: float = 10.0
    hit_rate_end: float | None = None
    hit_model: str = "poisson"
    ua_strings: int = 0
    ua_rate: int = 0

    def validate(self):
        if self.regime not in REGIMES:
            raise DataError(f"unknown regime {self.regime!r}")
        if not 1 <= self.pool <= 256:
            raise DataError("pool size must be 1..256")
        if self.regime in ("gateway", "bot"):
            if self.subscribers != 1:
                raise DataError(f"{self.regime} regime is single-address")
        elif not 0 <= self.subscribers <= 256:
            raise DataError("subscriber count must be 0..256")
        if self.regime in ("round_robin_pool", "dynamic_24h_lease", "dynamic_long_lease"):
            if self.subscribers > self.pool:
                raise DataError(
                    f"{self.regime}: {self.subscribers} subscribers exceed pool {self.pool}"
                )
        elif self.regime == "static_sparse" and self.subscribers > 256:
            raise DataError("static_sparse: more than 256 subscribers")
        for name in ("p_weekday", "p_weekend", "heavy_share", "p_heavy", "p_light"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name}={v} outside [0,1]")
        if self.lease_days < 1:
            raise DataError("lease must be at least one day")
        if self.hit_model not in ("poisson", "fixed"):
            raise DataError(f"unknown hit model {self.hit_model!r}")
        if self.hit_rate <= 0 or (self.hit_rate_end is not None and self.hit_rate_end <= 0):
            raise DataError("hit rates must be positive")
        if self.ua_rate < 0 or self.ua_strings < 0:
            raise DataError("UA parameters must be non-negative")
        if not float(self.ua_rate).is_integer():
            raise DataError("ua_rate is a whole number of samples per active address and day")
        if self.ua_rate > 0 and self.ua_strings < 1:
            raise DataError("ua_rate needs at least one UA string")


@dataclass(frozen=True)
class ChangePlan:
    day: int
    kind: str
    after: RegimeParams
    naming_after: str | None = None
    origin_after: int | None = None


@dataclass(frozen=True)
class BgpPlan:
    event: str
    day: int
    new_origin: int | None = None


@dataclass(frozen=True)
class BlockPlan:
    block: int
    regime: RegimeParams
    origin_as: int | None = None
    registry: str = "testreg"
    country: str = "ZZ"
    naming: str = "none"
    ptr_coverage: float = 1.0
    change: ChangePlan | None = None
    bgp: BgpPlan | None = None

    def validate(self, days: int):
        self.regime.validate()
        if self.naming not in NAMING_STYLES:
            raise DataError(f"unknown naming style {self.naming!r}")
        if not 0.0 <= self.ptr_coverage <= 1.0:
            raise DataError("ptr_coverage outside [0,1]")
        if self.change is not None:
            if self.change.kind not in CHANGE_KINDS:
                raise DataError(f"unknown change kind {self.change.kind!r}")
            if not 0 < self.change.day < days:
                raise DataError("change day outside the observation period")
            self.change.after.validate()
            if self.change.naming_after is not None and self.change.naming_after not in NAMING_STYLES:
                raise DataError(f"unknown naming style {self.change.naming_after!r}")
        if self.bgp is not None:
            if self.bgp.event not in BGP_EVENTS:
                raise DataError(f"unknown BGP event {self.bgp.event!r}")
            if not 0 < self.bgp.day < days:
                raise DataError("BGP event day outside the observation period")
            if self.bgp.event == "origin_change" and self.bgp.new_origin is None:
                raise DataError("origin_change needs new_origin")


@dataclass
class ScenarioSpec:
    seed: int
    first_day: datetime.date
    days: int
    blocks: list[BlockPlan]
    gzip_output: bool = False
    extra_assertions: list[dict] = field(default_factory=list)

    def validate(self):
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must fit in 64 bits")
        if self.days < 1:
            raise DataError("scenario must cover at least one day")
        if not self.blocks:
            raise DataError("scenario has no blocks")
        seen = set()
        for plan in self.blocks:
            if plan.block in seen:
                raise DataError(f"duplicate block {addrs.block_to_str(plan.block)}")
            seen.add(plan.block)
            plan.validate(self.days)

    @classmethod
    def from_toml(cls, path) -> "ScenarioSpec":
        with open(path, "rb") as f:
            return cls.from_dict(tomllib.load(f))

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        try:
            seed = int(doc["seed"])
            raw_first = doc["first_day"]
            days = int(doc["days"])
            raw_blocks = doc["blocks"]
        except KeyError as exc:
            raise DataError(f"scenario is missing required key {exc}") from None
        if isinstance(raw_first, datetime.datetime):
            raw_first = raw_first.date()
        first_day = raw_first if isinstance(raw_first, datetime.date) else parse_day(raw_first)
        blocks = []
        for section in raw_blocks:
            blocks.extend(_expand_block_section(section))
        spec = cls(
            seed=seed,
            first_day=first_day,
            days=days,
            blocks=blocks,
            gzip_output=bool(doc.get("gzip_output", False)),
            extra_assertions=list(doc.get("assertions", [])),
        )
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "first_day": self.first_day.isoformat(),
            "days": self.days,
            "gzip_output": self.gzip_output,
            "blocks": [_plan_to_dict(p) for p in self.blocks],
            "assertions": self.extra_assertions,
        }


_REGIME_KEYS = (
    "regime", "subscribers", "pool", "lease_days", "p_weekday", "p_weekend",
    "heavy_share", "p_heavy", "p_light", "hit_rate", "hit_rate_end",
    "hit_model", "ua_strings", "ua_rate",
)


def _regime_from(section: dict, base: RegimeParams | None = None) -> RegimeParams:
    kwargs = {k: section[k] for k in _REGIME_KEYS if k in section}
    if base is not None:
        return replace(base, **kwargs)
    if "regime" not in kwargs:
        raise DataError("block plan is missing a regime")
    return RegimeParams(**kwargs)


def _expand_block_section(section: dict) -> list[BlockPlan]:
    try:
        base_text = section["block"]
    except KeyError:
        raise DataError("block plan is missing the block prefix") from None
    base, mask = addrs.parse_prefix(base_text)
    if mask != 24:
        raise DataError(f"block plans must name /24 prefixes, got {base_text!r}")
    count = int(section.get("count", 1))
    if count < 1:
        raise DataError("block count must be positive")
    regime = _regime_from(section)
    change = None
    if "change" in section:
        c = section["change"]
        change = ChangePlan(
            day=int(c["day"]),
            kind=c.get("kind", "reconfiguration"),
            after=_regime_from(c, base=regime),
            naming_after=c.get("naming_after"),
            origin_after=c.get("origin_after"),
        )
    bgp = None
    if "bgp" in section:
        b = section["bgp"]
        bgp = BgpPlan(event=b["event"], day=int(b["day"]), new_origin=b.get("new_origin"))
    plans = []
    first = base >> 8
    for i in range(count):
        plans.append(
            BlockPlan(
                block=first + i,
                regime=regime,
                origin_as=section.get("origin_as"),
                registry=section.get("registry", "testreg"),
                country=section.get("country", "ZZ"),
                naming=section.get("naming", "none"),
                ptr_coverage=float(section.get("ptr_coverage", 1.0)),
                change=change,
                bgp=bgp,
            )
        )
    return plans


def _plan_to_dict(plan: BlockPlan) -> dict:
    d = {
        "block": addrs.block_to_str(plan.block),
        "origin_as": plan.origin_as,
        "registry": plan.registry,
        "country": plan.country,
        "naming": plan.naming,
        "ptr_coverage": plan.ptr_coverage,
    }
    d.update({k: getattr(plan.regime, k) for k in _REGIME_KEYS})
    if plan.change is not None:
        d["change"] = {
            "day": plan.change.day,
            "kind": plan.change.kind,
            "naming_after": plan.change.naming_after,
            "origin_after": plan.change.origin_after,
            **{k: getattr(plan.change.after, k) for k in _REGIME_KEYS},
        }
    if plan.bgp is not None:
        d["bgp"] = {"event": plan.bgp.event, "day": plan.bgp.day, "new_origin": plan.bgp.new_origin}
    return d


# -- per-block generation ----------------------------------------------------------


def _weekend_mask(first_day: datetime.date, days: int) -> np.ndarray:
    start = first_day.weekday()
    return np.array([(start + d) % 7 >= 5 for d in range(days)], bool)


def _phases(plan: BlockPlan, days: int) -> list[tuple[RegimeParams, int, int]]:
    """(params, start, end) day spans, end exclusive."""
    if plan.change is None:
        return [(plan.regime, 0, days)]
    return [(plan.regime, 0, plan.change.day), (plan.change.after, plan.change.day, days)]


def _day_rate(p: RegimeParams, day: int, days: int) -> float:
    if p.hit_rate_end is None or days == 1:
        return p.hit_rate
    return p.hit_rate + (p.hit_rate_end - p.hit_rate) * (day / (days - 1))


def _daily_probability(p: RegimeParams, weekend: bool) -> float:
    return p.p_weekend if weekend else p.p_weekday


class _BlockGenerator:
    """Generates one block's hits matrix and UA events in documented order."""

    def __init__(self, plan: BlockPlan, spec: ScenarioSpec, weekend: np.ndarray):
        self.plan = plan
        self.days = spec.days
        self.weekend = weekend
        self.rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(plan.block,)))
        self.hits = np.zeros((256, spec.days), np.uint32)
        self.ua_events: list[tuple[int, int, int]] = []  # (day, offset, string index)
        self._lease_perm: np.ndarray | None = None
        self._lease_epoch = -1
        self._classes: np.ndarray | None = None

    def run(self):
        for params, start, end in _phases(self.plan, self.days):
            if params.regime == "dynamic_long_lease":
                self._classes = None
                self._lease_epoch = -1
            for day in range(start, end):
                self._one_day(params, day)
        return self.hits, self.ua_events

    def _one_day(self, p: RegimeParams, day: int):
        offsets = self._members(p, day)
        if offsets.size == 0:
            return
        prob = self._activity_probs(p, day, offsets)
        if prob is None:
            active = offsets
        else:
            mask = self.rng.random(offsets.size) < prob
            active = offsets[mask]
        if active.size == 0:
            return
        rate = _day_rate(p, day, self.days)
        if p.hit_model == "fixed":
            hits = np.full(active.size, max(1, round(rate)), np.uint32)
        else:
            hits = np.maximum(self.rng.poisson(rate, active.size), 1).astype(np.uint32)
        self.hits[active, day] = hits
        per = int(p.ua_rate)
        if per > 0:
            if p.ua_strings > 1:
                draws = self.rng.integers(0, p.ua_strings, size=active.size * per)
            else:
                draws = np.zeros(active.size * per, np.int64)
            i = 0
            for off in active:
                for k in range(per):
                    self.ua_events.append((day, int(off), int(draws[i])))
                    i += 1

    def _members(self, p: RegimeParams, day: int) -> np.ndarray:
        if p.regime == "static_sparse":
            return np.arange(p.subscribers)
        if p.regime in ("gateway", "bot"):
            return np.zeros(1, np.int64)
        if p.regime == "round_robin_pool":
            epoch = day // p.lease_days
            return (epoch * p.subscribers + np.arange(p.subscribers)) % p.pool
        if p.regime == "dynamic_24h_lease":
            return self.rng.permutation(p.pool)[: p.subscribers]
        # dynamic_long_lease: a fresh pool permutation at each lease epoch
        epoch = day // p.lease_days
        if epoch != self._lease_epoch:
            self._lease_perm = self.rng.permutation(p.pool)[: p.subscribers]
            self._lease_epoch = epoch
        return self._lease_perm

    def _activity_probs(self, p: RegimeParams, day: int, offsets: np.ndarray):
        """Per-member activity probability, or None when always active."""
        weekend = bool(self.weekend[day])
        if p.regime in ("gateway", "bot"):
            return None
        if p.regime == "dynamic_long_lease":
            if self._classes is None or self._classes.size != p.subscribers:
                heavy = int(round(p.heavy_share * p.subscribers))
                self._classes = np.arange(p.subscribers) < heavy
            base = np.where(self._classes, p.p_heavy, p.p_light)
            if weekend:
                base = base * (p.p_weekend if p.p_weekday == 0 else p.p_weekend / p.p_weekday)
                base = np.clip(base, 0.0, 1.0)
            return base
        prob = _daily_probability(p, weekend)
        if prob >= 1.0:
            return None
        return np.full(offsets.size, prob)


# -- analytic expectations ----------------------------------------------------------


def _phase_daily_mean_var(p: RegimeParams, weekend: np.ndarray) -> tuple[float, float]:
    """Expected active address-days and variance over one phase."""
    if p.regime in ("gateway", "bot"):
        return float(weekend.size), 0.0
    if p.regime == "dynamic_long_lease":
        heavy = int(round(p.heavy_share * p.subscribers))
        light = p.subscribers - heavy
        mean = var = 0.0
        for wk in weekend:
            scale = (p.p_weekend / p.p_weekday) if (wk and p.p_weekday > 0) else (0.0 if wk else 1.0)
            ph = min(1.0, p.p_heavy * (scale if wk else 1.0))
            pl = min(1.0, p.p_light * (scale if wk else 1.0))
            mean += heavy * ph + light * pl
            var += heavy * ph * (1 - ph) + light * pl * (1 - pl)
        return mean, var
    n_we = int(weekend.sum())
    n_wd = weekend.size - n_we
    s = p.subscribers
    mean = s * (n_wd * p.p_weekday + n_we * p.p_weekend)
    var = s * (
        n_wd * p.p_weekday * (1 - p.p_weekday) + n_we * p.p_weekend * (1 - p.p_weekend)
    )
    return mean, var


def expected_stu(plan: BlockPlan, weekend: np.ndarray, lo: int = 0, hi: int | None = None) -> tuple[float, float]:
    """Closed-form (mean, sigma) of the block's utilization over [lo, hi)."""
    if hi is None:
        hi = weekend.size
    mean = var = 0.0
    for params, start, end in _phases(plan, weekend.size):
        s, e = max(start, lo), min(end, hi)
        if s >= e:
            continue
        m, v = _phase_daily_mean_var(params, weekend[s:e])
        mean += m
        var += v
    cells = 256 * (hi - lo)
    return mean / cells, math.sqrt(var) / cells


def expected_fd_range(plan: BlockPlan, weekend: np.ndarray) -> tuple[int, int]:
    """Analytic bounds on the count of distinct active addresses."""
    phases = _phases(plan, weekend.size)
    if len(phases) > 1:
        los, his = zip(*(_fd_range_one(p, weekend[s:e]) for p, s, e in phases))
        # Phases may reuse addresses, so the union is at least the largest
        # phase and at most the sum (clamped to the block).
        return max(los), min(256, sum(his))
    p, s, e = phases[0]
    return _fd_range_one(p, weekend[s:e])


def _fd_range_one(p: RegimeParams, weekend: np.ndarray) -> tuple[int, int]:
    t = weekend.size
    if t == 0 or (p.regime != "gateway" and p.regime != "bot" and p.subscribers == 0):
        return 0, 0
    if p.regime in ("gateway", "bot"):
        return 1, 1
    if p.regime == "static_sparse":
        q = 1.0
        for wk in weekend:
            q *= 1.0 - _daily_probability(p, bool(wk))
        if q == 0.0:
            return p.subscribers, p.subscribers
        mean = p.subscribers * (1 - q)
        sigma = math.sqrt(p.subscribers * q * (1 - q))
        lo = max(0, math.floor(mean - 3 * sigma - 1e-9))
        return lo, p.subscribers
    if p.regime == "round_robin_pool":
        epochs = -(-t // p.lease_days)
        touched = min(p.pool, epochs * p.subscribers)
        if p.p_weekday >= 1.0 and p.p_weekend >= 1.0:
            return touched, touched
        return 1, touched
    if p.regime == "dynamic_24h_lease":
        q = 1.0
        for wk in weekend:
            q *= 1.0 - (p.subscribers / p.pool) * _daily_probability(p, bool(wk))
        if p.subscribers == p.pool and p.p_weekday >= 1.0 and p.p_weekend >= 1.0:
            return p.pool, p.pool
        mean = p.pool * (1 - q)
        sigma = math.sqrt(max(0.0, p.pool * q * (1 - q)))
        lo = max(0, math.floor(mean - 3 * sigma) - 2)
        return lo, p.pool
    # dynamic_long_lease: per-epoch coverage with loose tolerance
    heavy = int(round(p.heavy_share * p.subscribers))
    h_share = heavy / p.subscribers if p.subscribers else 0.0
    q = 1.0
    for start in range(0, t, p.lease_days):
        span = weekend[start : start + p.lease_days]
        miss_h = miss_l = 1.0
        for wk in span:
            scale = (p.p_weekend / p.p_weekday) if (wk and p.p_weekday > 0) else (0.0 if wk else 1.0)
            miss_h *= 1 - min(1.0, p.p_heavy * (scale if wk else 1.0))
            miss_l *= 1 - min(1.0, p.p_light * (scale if wk else 1.0))
        covered = (p.subscribers / p.pool) * (h_share * (1 - miss_h) + (1 - h_share) * (1 - miss_l))
        q *= 1 - covered
    mean = p.pool * (1 - q)
    sigma = math.sqrt(max(0.0, p.pool * q * (1 - q)))
    lo = max(0, math.floor(mean - 4 * sigma) - 2)
    return lo, p.pool


def expected_tag(plan: BlockPlan) -> str:
    naming = plan.naming
    if plan.change is not None and plan.change.naming_after is not None:
        naming = plan.change.naming_after
    covered = math.ceil(256 * plan.ptr_coverage)
    if naming == "none" or covered < 16:
        return "unknown"
    return naming


def expected_monthly_deltas(plan: BlockPlan, weekend: np.ndarray, month_days: int = 28):
    """Expected signed month-over-month utilization deltas with 3-sigma tols."""
    months = weekend.size // month_days
    stats = [
        expected_stu(plan, weekend, m * month_days, (m + 1) * month_days)
        for m in range(months)
    ]
    out = []
    for (m0, s0), (m1, s1) in zip(stats, stats[1:]):
        out.append((m1 - m0, 3 * math.sqrt(s0 * s0 + s1 * s1) + 1e-9))
    return out


def _is_constant(plan: BlockPlan) -> bool:
    """True when the active set provably never changes day to day."""
    if plan.change is not None:
        return False
    p = plan.regime
    if p.regime in ("gateway", "bot"):
        return True
    return (
        p.regime == "static_sparse"
        and p.p_weekday >= 1.0
        and p.p_weekend >= 1.0
    )


# -- bundle generation ----------------------------------------------------------


def _ua_string(block: int, subscriber: int, idx: int) -> str:
    return f"ua-{block:06x}-{subscriber}-{idx}"


def _ptr_name(block: int, offset: int, style: str) -> str:
    if style == "static":
        return f"cust-{offset}.static.blk-{block:06x}.example.net"
    return f"dsl-{offset}.pool.blk-{block:06x}.example.net"


def _origin_on_day(plan: BlockPlan, day: int) -> int | None:
    origin = plan.origin_as
    if plan.change is not None and plan.change.origin_after is not None and day >= plan.change.day:
        origin = plan.change.origin_after
    if plan.bgp is not None:
        if plan.bgp.event == "announce" and day < plan.bgp.day:
            return None
        if plan.bgp.event == "withdraw" and day >= plan.bgp.day:
            return None
        if plan.bgp.event == "origin_change" and day >= plan.bgp.day:
            origin = plan.bgp.new_origin
    return origin


def generate(spec: ScenarioSpec, out_dir) -> dict:
    """Write the full dataset bundle plus ground truth; returns the ground truth."""
    spec.validate()
    os.makedirs(out_dir, exist_ok=True)
    weekend = _weekend_mask(spec.first_day, spec.days)
    plans = sorted(spec.blocks, key=lambda p: p.block)
    dates = [
        (spec.first_day + datetime.timedelta(days=d)).isoformat() for d in range(spec.days)
    ]

    results = {}
    for plan in plans:
        gen = _BlockGenerator(plan, spec, weekend)
        results[plan.block] = gen.run()

    _write_activity(out_dir, spec, plans, results, dates)
    _write_ua(out_dir, spec, plans, results, dates)
    _write_ptr(out_dir, plans)
    _write_routing(out_dir, plans, dates)
    _write_delegations(out_dir, plans)
    write_json(os.path.join(out_dir, "scenario.json"), spec.to_dict())

    truth = build_ground_truth(spec)
    write_json(os.path.join(out_dir, "ground_truth.json"), truth)
    return truth


def _open_out(path: str, compress: bool):
    return gzip.open(path, "wb", mtime=0) if compress else open(path, "wb")


def _write_activity(out_dir, spec, plans, results, dates):
    name = "activity.csv.gz" if spec.gzip_output else "activity.csv"
    rows = []
    for day, date in enumerate(dates):
        prefix = date.encode()
        for plan in plans:
            hits, _ = results[plan.block]
            col = hits[:, day]
            for off in np.flatnonzero(col):
                ip = addrs.int_to_ip((plan.block << 8) + int(off)).encode()
                rows.append(prefix + b"," + ip + b"," + str(int(col[off])).encode() + b"\n")
    payload = b"".join(rows)
    if spec.gzip_output:
        payload = gzip.compress(payload, mtime=0)
    atomic_bytes(os.path.join(out_dir, name), payload)


def _write_ua(out_dir, spec, plans, results, dates):
    rows = []
    for day, date in enumerate(dates):
        for plan in plans:
            _, events = results[plan.block]
            for d, off, idx in events:
                if d != day:
                    continue
                ip = addrs.int_to_ip((plan.block << 8) + off)
                rows.append(f"{date},{ip},{_ua_string(plan.block, off, idx)}\n")
    atomic_bytes(os.path.join(out_dir, "ua.csv"), "".join(rows).encode())


def _write_ptr(out_dir, plans):
    rows = []
    for plan in plans:
        naming = plan.naming
        if plan.change is not None and plan.change.naming_after is not None:
            naming = plan.change.naming_after
        if naming == "none":
            continue
        covered = math.ceil(256 * plan.ptr_coverage)
        for off in range(covered):
            ip = addrs.int_to_ip((plan.block << 8) + off)
            rows.append(f"{ip},{_ptr_name(plan.block, off, naming)}\n")
    atomic_bytes(os.path.join(out_dir, "ptr.csv"), "".join(rows).encode())


def _write_routing(out_dir, plans, dates):
    rdir = os.path.join(out_dir, "routing")
    os.makedirs(rdir, exist_ok=True)
    for day, date in enumerate(dates):
        lines = [f"{DECOY_PREFIX},{DECOY_AS}\n"]
        for plan in plans:
            origin = _origin_on_day(plan, day)
            if origin is not None:
                lines.append(f"{addrs.block_to_str(plan.block)},{origin}\n")
        atomic_bytes(os.path.join(rdir, f"{date}.csv"), "".join(lines).encode())


def _write_delegations(out_dir, plans):
    lines = [
        "2|nro|20150107|0|19830705|20150106|+0000\n",
        "testreg|*|asn|*|1|summary\n",
        "testreg|*|ipv4|*|{}|summary\n".format(len(plans)),
        "testreg|ZZ|asn|64512|1|20100101|allocated\n",
        "testreg|ZZ|ipv6|2001:db8::|32|20100101|allocated\n",
    ]
    for plan in plans:
        base = addrs.int_to_ip(plan.block << 8)
        lines.append(f"{plan.registry}|{plan.country}|ipv4|{base}|256|20100101|allocated\n")
    atomic_bytes(os.path.join(out_dir, "delegations.txt"), "".join(lines).encode())


# -- ground truth -----------------------------------------------------------------


def build_ground_truth(spec: ScenarioSpec) -> dict:
    weekend = _weekend_mask(spec.first_day, spec.days)
    plans = sorted(spec.blocks, key=lambda p: p.block)
    blocks = {}
    assertions: list[dict] = []
    names = set()

    def add(kind: str, block: int | None = None, **fields):
        name = kind if block is None else f"{kind}:{addrs.block_to_str(block)}"
        while name in names:
            name += "+"
        names.add(name)
        rec = {"name": name, "kind": kind}
        if block is not None:
            rec["block"] = addrs.block_to_str(block)
        rec.update(fields)
        assertions.append(rec)

    months = spec.days // 28
    major_set = []
    any_ua = any(p.regime.ua_rate > 0 or (p.change and p.change.after.ua_rate > 0) for p in plans)

    for plan in plans:
        key = addrs.block_to_str(plan.block)
        stu_mean, stu_sigma = expected_stu(plan, weekend)
        fd_lo, fd_hi = expected_fd_range(plan, weekend)
        tag = expected_tag(plan)
        info = {
            "regime": plan.regime.regime,
            "expected_stu": stu_mean,
            "stu_tol": max(3 * stu_sigma, 1e-9),
            "expected_fd": [fd_lo, fd_hi],
            "expected_tag": tag,
            "origin_as": plan.origin_as,
            "registry": plan.registry,
            "country": plan.country,
        }
        add("block_stu", plan.block, expected=stu_mean, tol=info["stu_tol"])
        if fd_hi > 0:
            add("block_fd_range", plan.block, expected=[fd_lo, fd_hi])
        add("block_tag", plan.block, expected=tag)

        if months >= 2:
            deltas = expected_monthly_deltas(plan, weekend)
            peak = max(range(len(deltas)), key=lambda i: abs(deltas[i][0]))
            value, tol = deltas[peak]
            cls = "major" if abs(value) > 0.25 else "minor"
            info["expected_change"] = cls
            add("block_change_class", plan.block, expected=cls)
            if plan.change is not None:
                info["expected_max_delta"] = value
                add("block_max_delta", plan.block, expected=value, tol=tol)
            if cls == "major":
                major_set.append(key)

        if _is_constant(plan):
            wins = [w for w in CHURN_ZERO_WINDOWS if w * 2 <= spec.days]
            if wins:
                add("churn_zero", plan.block, windows=wins)
        p = plan.regime
        if (
            plan.change is None
            and p.regime == "round_robin_pool"
            and p.p_weekday >= 1.0
            and p.p_weekend >= 1.0
            and spec.days // p.lease_days >= 2
        ):
            add(
                "boundary_up_exact",
                plan.block,
                window=p.lease_days,
                expected=min(p.subscribers, p.pool - p.subscribers),
            )
        if (
            plan.change is None
            and p.regime == "dynamic_24h_lease"
            and p.p_weekday >= 1.0
            and p.p_weekend >= 1.0
            and spec.days >= 2
        ):
            s, pool = p.subscribers, p.pool
            mean_up = s * (pool - s) / pool
            var = s * (s / pool) * (1 - s / pool) * (pool - s) / max(1, pool - 1)
            tol = 3 * math.sqrt(var / (spec.days - 1)) + 1e-9
            add("daily_up_mean", plan.block, window=1, expected=mean_up, tol=tol)
        if p.regime in ("gateway", "bot") and p.ua_rate * spec.days >= 100:
            region = "bot" if p.regime == "bot" else "gateway"
            info["expected_density_region"] = region
            add("host_density_region", plan.block, expected=region)
        blocks[key] = info

    if months >= 2 and len(plans) > 1:
        add("major_set", expected=sorted(major_set))
    if any_ua:
        active_blocks = sum(
            1 for p in plans if expected_fd_range(p, weekend)[1] > 0
        )
        add("cube_total", expected=active_blocks)

    for i, extra in enumerate(spec.extra_assertions):
        rec = dict(extra)
        rec.setdefault("name", f"extra-{i}:{rec.get('kind', 'unknown')}")
        if "kind" not in rec:
            raise DataError(f"assertion {rec['name']} has no kind")
        assertions.append(rec)

    return {
        "seed": spec.seed,
        "first_day": spec.first_day.isoformat(),
        "days": spec.days,
        "blocks": blocks,
        "assertions": assertions,
    }
