"""Monte Carlo harness for finite-horizon outcome proxies.

The events "red colors infinitely many sites" and so on are tail events that
no finite run decides. A type is counted as *growing* at horizon ``T`` when it
has colored a site at sup-norm distance >= ``R`` and has colored at least one
new site during the last ``W`` generations. Every estimate reported here is an
estimate of such a proxy, never of the asymptotic event itself.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Iterable, Optional, Sequence

from .advantage import supercritical_report
from .engine import CountOverflowError, RunSummary, run
from .laws import BLUE, RED, InitialCell, TwoTypeConfig, as_fraction
from . import rng as rngmod

ESTIMATORS = ("G_r", "G_b", "C", "RedOnly", "BlueOnly")


@dataclass(frozen=True)
class EventProxySpec:
    horizon: int
    escape_radius: int
    stall_window: int

    def __post_init__(self):
        if not 0 < self.stall_window <= self.horizon:
            raise ValueError("need 0 < stall_window <= horizon")
        if self.escape_radius < 1:
            raise ValueError("escape_radius must be >= 1")

    @classmethod
    def default(cls, horizon: int) -> "EventProxySpec":
        """R = ceil(T/4), W = ceil(T/5)."""
        return cls(horizon, max(1, math.ceil(horizon / 4)), max(1, math.ceil(horizon / 5)))


@dataclass
class OutcomeRecord:
    replication: int
    seed: int
    proxy_G_r: bool
    proxy_G_b: bool
    colored_red: int
    colored_blue: int
    max_radius_red: int
    max_radius_blue: int
    failed: bool = False
    error: Optional[str] = None
    approximate: bool = False
    runtime: float = 0.0

    @property
    def proxy_C(self) -> bool:
        return self.proxy_G_r and self.proxy_G_b

    @property
    def red_only(self) -> bool:
        return self.proxy_G_r and not self.proxy_G_b

    @property
    def blue_only(self) -> bool:
        return self.proxy_G_b and not self.proxy_G_r

    def flag(self, estimator: str) -> bool:
        return {
            "G_r": self.proxy_G_r,
            "G_b": self.proxy_G_b,
            "C": self.proxy_C,
            "RedOnly": self.red_only,
            "BlueOnly": self.blue_only,
        }[estimator]

    def as_dict(self, with_runtime: bool = False) -> dict:
        d = asdict(self)
        d["proxy_C"] = self.proxy_C
        if not with_runtime:
            d.pop("runtime")
        return d


def classify_outcome(summary: RunSummary, proxy: EventProxySpec) -> OutcomeRecord:
    """Decide both growth proxies from a run's per-generation statistics."""
    if summary.horizon < proxy.horizon or len(summary.history) <= proxy.horizon:
        raise ValueError(f"run horizon {summary.horizon} shorter than proxy horizon {proxy.horizon}")
    hist = summary.history[: proxy.horizon + 1]
    last = hist[-1]
    window = hist[-proxy.stall_window:]

    def grows(radius: int, new_counts: Iterable[int]) -> bool:
        return radius >= proxy.escape_radius and sum(new_counts) > 0

    return OutcomeRecord(
        replication=summary.replication,
        seed=summary.seed,
        proxy_G_r=grows(last.max_radius_red, (h.new_red for h in window)),
        proxy_G_b=grows(last.max_radius_blue, (h.new_blue for h in window)),
        colored_red=last.colored_red,
        colored_blue=last.colored_blue,
        max_radius_red=last.max_radius_red,
        max_radius_blue=last.max_radius_blue,
        approximate=summary.approximate,
    )


# interval estimates ---------------------------------------------------------

def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class Estimate:
    estimator: str
    successes: int
    replications: int
    failures: int
    ci_low: float
    ci_high: float

    @property
    def estimate(self) -> float:
        return self.successes / self.replications if self.replications else float("nan")

    @property
    def standard_error(self) -> float:
        n = self.replications
        if not n:
            return float("nan")
        q = self.estimate
        return math.sqrt(q * (1 - q) / n)


@dataclass
class EstimateTable:
    """Proxy-event frequencies over the successful replications."""

    rows: dict[str, Estimate]
    replications: int
    failures: int
    p: Optional[Fraction] = None
    p_threshold: Optional[Fraction] = None
    label: str = ""

    @classmethod
    def from_records(cls, records: Sequence[OutcomeRecord], confidence: float = 0.95, **extra) -> "EstimateTable":
        ok = [r for r in records if not r.failed]
        failures = len(records) - len(ok)
        rows = {}
        for name in ESTIMATORS:
            k = sum(r.flag(name) for r in ok)
            lo, hi = wilson_interval(k, len(ok), confidence)
            rows[name] = Estimate(name, k, len(ok), failures, lo, hi)
        return cls(rows, len(records), failures, **extra)

    def __getitem__(self, name: str) -> Estimate:
        return self.rows[name]

    def frequency(self, name: str) -> float:
        return self.rows[name].estimate

    CSV_HEADER = ("label", "p", "estimator", "estimate", "ci_low", "ci_high", "replications", "failures",
                  "p_threshold")

    def csv_rows(self) -> list[tuple]:
        p = "" if self.p is None else str(self.p)
        thr = "" if self.p_threshold is None else str(self.p_threshold)
        return [
            (self.label, p, e.estimator, f"{e.estimate:.6f}", f"{e.ci_low:.6f}", f"{e.ci_high:.6f}",
             e.replications, e.failures, thr)
            for e in self.rows.values()
        ]


# replication driver ---------------------------------------------------------

def _replicate(args) -> OutcomeRecord:
    config, proxy, r = args
    t0 = time.perf_counter()
    try:
        summary = run(config, proxy.horizon, replication=r, keep_state=False)
    except (CountOverflowError, OverflowError) as exc:
        return OutcomeRecord(r, rngmod.replication_seed(config.master_seed, r), False, False, 0, 0, 0, 0,
                             failed=True, error=f"{type(exc).__name__}: {exc}",
                             runtime=time.perf_counter() - t0)
    rec = classify_outcome(summary, proxy)
    rec.runtime = time.perf_counter() - t0
    return rec


def run_replications(config: TwoTypeConfig, proxy: EventProxySpec, replications: int, threads: int = 1,
                     first: int = 0) -> list[OutcomeRecord]:
    """Replications ``first .. first + replications - 1``, sorted by id.

    The seed of each replication depends only on its id, so the result is the
    same for any ``threads``.
    """
    jobs = [(config, proxy, r) for r in range(first, first + replications)]
    if threads <= 1:
        records = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return sorted(records, key=lambda rec: rec.replication)


def monte_carlo(config: TwoTypeConfig, proxy: EventProxySpec, replications: int, threads: int = 1,
                confidence: float = 0.95, records_out: Optional[list] = None, label: str = "") -> EstimateTable:
    """Wilson-interval estimates of the five proxy events."""
    records = run_replications(config, proxy, replications, threads)
    if records_out is not None:
        records_out.extend(records)
    return EstimateTable.from_records(records, confidence, p=config.p, label=label)


def axis_directions(d: int) -> list[tuple[int, ...]]:
    out = []
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            out.append(tuple(e))
    return out


def best_threshold(config: TwoTypeConfig, directions=None) -> Optional[Fraction]:
    """Largest exact blue threshold (n-1)/n over the given (default: axis) directions."""
    if config.blue_law is None:
        return None
    dirs = directions or axis_directions(config.dimension)
    thresholds = [supercritical_report(config.red_law, config.blue_law, x).p_threshold for x in dirs]
    thresholds = [t for t in thresholds if t is not None]
    return max(thresholds) if thresholds else None


def p_sweep(base: TwoTypeConfig, p_values: Sequence, proxy: EventProxySpec, replications: int,
            threads: int = 1, directions=None, records_out: Optional[dict] = None) -> list[EstimateTable]:
    """One estimate table per ``p`` (strictly increasing), each tagged with the exact threshold."""
    ps = [as_fraction(p) for p in p_values]
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p values must be strictly increasing")
    threshold = best_threshold(base, directions)
    tables = []
    for p in ps:
        recs: list = []
        table = monte_carlo(base.replace(p=p), proxy, replications, threads, records_out=recs, label="sweep")
        table.p_threshold = threshold
        if records_out is not None:
            records_out[p] = recs
        tables.append(table)
    return tables


@dataclass(frozen=True)
class Difference:
    first: str
    second: str
    estimator: str
    difference: float
    pooled_se: float
    ci_low: float
    ci_high: float

    @property
    def flagged(self) -> bool:
        """Difference beyond 3 pooled standard errors."""
        return abs(self.difference) > 3 * self.pooled_se if self.pooled_se > 0 else self.difference != 0


def compare_tables(a: EstimateTable, b: EstimateTable, name_a: str, name_b: str,
                   estimators: Sequence[str] = ESTIMATORS) -> list[Difference]:
    z = NormalDist().inv_cdf(0.975)
    out = []
    for e in estimators:
        ea, eb = a[e], b[e]
        se = math.hypot(ea.standard_error, eb.standard_error)
        diff = ea.estimate - eb.estimate
        out.append(Difference(name_a, name_b, e, diff, se, diff - z * se, diff + z * se))
    return out


@dataclass
class TieBreakComparison:
    tables: dict[str, EstimateTable]
    differences: list[Difference] = field(default_factory=list)

    @property
    def flagged(self) -> list[Difference]:
        return [d for d in self.differences if d.flagged]


def tie_break_sensitivity(config: TwoTypeConfig, proxy: EventProxySpec, replications: int,
                          threads: int = 1, rules: Sequence[str] = ("coin", "red_wins", "blue_wins", "proportional")
                          ) -> TieBreakComparison:
    """Proxy estimates under each tie-break rule, with pairwise differences."""
    tables = {rule: monte_carlo(config.replace(tie_break=rule), proxy, replications, threads, label=rule)
              for rule in rules}
    diffs = []
    for i, a in enumerate(rules):
        for b in rules[i + 1:]:
            diffs.extend(compare_tables(tables[a], tables[b], a, b))
    return TieBreakComparison(tables, diffs)


def swap_colors(config: TwoTypeConfig, origin_shift: bool = False) -> TwoTypeConfig:
    """The label-exchanged configuration.

    Red and blue laws trade places, every initial particle and pre-colored
    site changes color, and red_wins/blue_wins trade places. With
    ``origin_shift`` the lattice is translated so the new red particle sits
    at the origin again.
    """
    if config.blue_law is None:
        raise ValueError("label exchange needs two laws")
    swap = {RED: BLUE, BLUE: RED}
    cells = config.initial_cells()
    shift = (0,) * config.dimension
    if origin_shift:
        blue_sites = [c.site for c in cells if c.color == BLUE]
        if blue_sites:
            shift = tuple(-c for c in min(blue_sites))
    move = lambda z: tuple(a + b for a, b in zip(z, shift))
    tie = {"red_wins": "blue_wins", "blue_wins": "red_wins"}.get(config.tie_break, config.tie_break)
    return config.replace(
        red_law=config.blue_law,
        blue_law=config.red_law,
        initial=tuple(InitialCell(move(c.site), swap[c.color], c.count) for c in cells),
        precolored=tuple((move(z), swap[c]) for z, c in config.precolored),
        tie_break=tie,
    )
