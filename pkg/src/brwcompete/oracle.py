"""Reference implementations used to certify the aggregate engine.

* :func:`simulate_per_particle` follows every particle individually using
  Python's :mod:`random` (no numpy, no shared sampling code with the engine).
* :func:`enumerate_exact` expands the full outcome tree of a tiny instance in
  exact rational arithmetic.

Both only share the record types and the digest format with the engine.
"""
from __future__ import annotations

import bisect
import itertools
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from scipy.stats import chi2_contingency

from . import rng as rngmod
from .engine import GenerationStats, RunSummary, format_digest
from .laws import BLUE, RED, ConfigError, TwoTypeConfig

OutcomeDistribution = dict[bytes, Fraction]


class BudgetExceeded(RuntimeError):
    pass


def _initial(config: TwoTypeConfig):
    colors: dict[tuple, tuple[str, int]] = {}
    particles: dict[tuple, list[int]] = {}
    for site, color in config.precolored:
        if colors.setdefault(site, (color, -1))[0] != color:
            raise ConfigError(f"site {site} pre-colored both red and blue")
    for cell in config.initial_cells():
        have = colors.get(cell.site)
        if have is not None and have[0] != cell.color:
            raise ConfigError(f"{cell.color} particles at {cell.site}, which is colored {have[0]}")
        colors[cell.site] = (cell.color, 0)
        particles.setdefault(cell.site, [0, 0])[0 if cell.color == RED else 1] += cell.count
    return colors, particles


class _Record:
    """Per-generation statistics, computed from the oracle's own state."""

    def __init__(self):
        self.history: list[GenerationStats] = []
        self.radius = {RED: 0, BLUE: 0}

    def add(self, t, colors, particles, visited, new_sites):
        new = {RED: 0, BLUE: 0}
        for z in new_sites:
            c = colors[z][0]
            new[c] += 1
            self.radius[c] = max(self.radius[c], max(abs(v) for v in z))
        n_color = {RED: 0, BLUE: 0}
        for c, _ in colors.values():
            n_color[c] += 1
        self.history.append(GenerationStats(
            generation=t,
            red_particles=sum(v[0] for v in particles.values()),
            blue_particles=sum(v[1] for v in particles.values()),
            new_red=new[RED],
            new_blue=new[BLUE],
            colored_red=n_color[RED],
            colored_blue=n_color[BLUE],
            visited=len(visited),
            max_radius_red=self.radius[RED],
            max_radius_blue=self.radius[BLUE],
            occupied=sum(1 for v in particles.values() if v[0] or v[1]),
        ))


def _digest(colors, particles) -> bytes:
    rows = []
    for z in sorted(particles):
        r, b = particles[z]
        if r or b:
            rows.append((z, colors[z][0], r, b))
    return format_digest(rows)


def _full_digest(colors, particles) -> bytes:
    rows = []
    for z in sorted(colors):
        r, b = particles.get(z, (0, 0))
        rows.append((z, colors[z][0], r, b))
    return format_digest(rows)


class _Sampler:
    def __init__(self, pmf):
        self.values = [v for v, _ in pmf]
        acc, self.cum = Fraction(0), []
        for _, w in pmf:
            acc += w
            self.cum.append(float(acc))
        self.cum[-1] = 1.0

    def draw(self, rand: random.Random):
        return self.values[bisect.bisect_right(self.cum, rand.random())]


def simulate_per_particle(config: TwoTypeConfig, horizon: int, replication: int = 0,
                          particle_budget: int = 10**6) -> RunSummary:
    """Particle-by-particle simulation with the engine's coloring semantics."""
    seed = rngmod.replication_seed(config.master_seed, replication)
    rand = random.Random(rngmod.mix(seed, rngmod.ORACLE))
    offspring = {c: _Sampler(config.law(c).offspring_pmf) for c in (RED, BLUE) if config.law(c)}
    moves = {c: _Sampler(config.law(c).displacement_pmf) for c in (RED, BLUE) if config.law(c)}
    p = float(config.p)

    colors, counts = _initial(config)
    # explicit particle list, one entry per particle
    particles = [(z, RED) for z, (r, _) in sorted(counts.items()) for _ in range(r)]
    particles += [(z, BLUE) for z, (_, b) in sorted(counts.items()) for _ in range(b)]
    visited = set(counts)
    rec = _Record()
    rec.add(0, colors, counts, visited, [z for z in colors if colors[z][1] == 0])

    for t in range(horizon):
        arrivals: dict[tuple, list] = defaultdict(list)
        born = 0
        for z, c in particles:
            for _ in range(offspring[c].draw(rand)):
                y = moves[c].draw(rand)
                arrivals[tuple(a + b for a, b in zip(z, y))].append(c)
                born += 1
            if born > particle_budget:
                raise BudgetExceeded(f"more than {particle_budget} particles")
        particles = []
        new_sites = []
        for z in sorted(arrivals):
            kids = arrivals[z]
            old = colors.get(z)
            if old is None:
                n_r = kids.count(RED)
                n_b = len(kids) - n_r
                if n_b == 0:
                    site = RED
                elif n_r == 0:
                    site = BLUE
                else:
                    site = _tie(config.tie_break, n_r, n_b, rand)
                colors[z] = (site, t + 1)
                new_sites.append(z)
                recolor = config.same_step_recolor and n_r > 0 and n_b > 0
            else:
                site = old[0]
                recolor = True
            visited.add(z)
            for c in kids:
                if recolor and c != site and rand.random() < p:
                    c = site
                particles.append((z, c))
        counts = {}
        for z, c in particles:
            counts.setdefault(z, [0, 0])[0 if c == RED else 1] += 1
        rec.add(t + 1, colors, counts, visited, new_sites)

    return RunSummary(horizon=horizon, replication=replication, seed=seed, history=rec.history,
                      digest="", occupancy=_digest(colors, counts), colored=_full_digest(colors, counts))


def _tie(rule: str, n_r: int, n_b: int, rand: random.Random) -> str:
    if rule == "red_wins":
        return RED
    if rule == "blue_wins":
        return BLUE
    if rule == "coin":
        return RED if rand.random() < 0.5 else BLUE
    return RED if rand.random() * (n_r + n_b) < n_r else BLUE


# exact enumeration ----------------------------------------------------------

def _tie_outcomes(rule: str, n_r: int, n_b: int):
    if rule == "red_wins":
        return [(RED, Fraction(1))]
    if rule == "blue_wins":
        return [(BLUE, Fraction(1))]
    if rule == "coin":
        return [(RED, Fraction(1, 2)), (BLUE, Fraction(1, 2))]
    q = Fraction(n_r, n_r + n_b)
    return [(RED, q), (BLUE, 1 - q)]


def _binomial_pmf(m: int, p: Fraction):
    if p == 0:
        return [(0, Fraction(1))]
    if p == 1:
        return [(m, Fraction(1))]
    return [(j, math.comb(m, j) * p**j * (1 - p) ** (m - j)) for j in range(m + 1)]


def _particle_outcomes(law):
    """All (arrival offsets, probability) for one parent; offsets as a sorted tuple."""
    out: dict[tuple, Fraction] = defaultdict(Fraction)
    n_paths = 0
    for k, wk in law.offspring_pmf:
        for ys in itertools.product(law.displacement_pmf, repeat=k):
            w = wk
            for _, wy in ys:
                w *= wy
            out[tuple(sorted(y for y, _ in ys))] += w
            n_paths += 1
    return list(out.items()), n_paths


def enumerate_exact(config: TwoTypeConfig, horizon: int, leaf_budget: int = 10**5,
                    occupied_only: bool = True) -> OutcomeDistribution:
    """Exact law of the state after ``horizon <= 2`` generations.

    Every combination of offspring counts, displacements, tie-breaks and
    recoloring outcomes is expanded with exact rational weights. The result
    is keyed by the canonical digest of the occupied sites (all colored
    sites with ``occupied_only=False``).
    """
    if not 0 <= horizon <= 2:
        raise ValueError("exact enumeration supports horizon 0, 1 or 2")
    p = config.p
    per_color = {c: _particle_outcomes(config.law(c)) for c in (RED, BLUE) if config.law(c)}

    colors, counts = _initial(config)
    start = (tuple(sorted(colors.items())), tuple(sorted((z, tuple(v)) for z, v in counts.items() if any(v))))
    dist: dict[tuple, Fraction] = {start: Fraction(1)}
    leaves = 0

    for t in range(horizon):
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (col_items, part_items), w_state in dist.items():
            colors = dict(col_items)
            # distribution of the multiset of arrivals (site, color)
            arrivals: dict[tuple, Fraction] = {(): Fraction(1)}
            for z, (n_r, n_b) in part_items:
                for c, n in ((RED, n_r), (BLUE, n_b)):
                    if not n:
                        continue
                    outcomes, n_paths = per_color[c]
                    for _ in range(n):
                        leaves += n_paths * len(arrivals)
                        if leaves > leaf_budget:
                            raise BudgetExceeded(f"outcome tree exceeds {leaf_budget} leaves")
                        merged: dict[tuple, Fraction] = defaultdict(Fraction)
                        for acc, wa in arrivals.items():
                            for offs, wo in outcomes:
                                add = tuple((tuple(a + b for a, b in zip(z, y)), c) for y in offs)
                                merged[tuple(sorted(acc + add))] += wa * wo
                        arrivals = merged
            for arr, w_arr in arrivals.items():
                for state, w in _resolve(colors, arr, t, config, p):
                    nxt[state] += w_state * w_arr * w
        dist = nxt

    out: OutcomeDistribution = defaultdict(Fraction)
    for (col_items, part_items), w in dist.items():
        colors = dict(col_items)
        particles = {z: list(v) for z, v in part_items}
        key = _digest(colors, particles) if occupied_only else _full_digest(colors, particles)
        out[key] += w
    return dict(out)


def _resolve(colors, arrivals, t, config, p):
    """Expand tie-breaks and recoloring for one arrival multiset."""
    per_site: dict[tuple, list[int]] = {}
    for z, c in arrivals:
        per_site.setdefault(z, [0, 0])[0 if c == RED else 1] += 1
    # choices per site: list of (site color, red count, blue count, prob)
    options = []
    for z in sorted(per_site):
        n_r, n_b = per_site[z]
        old = colors.get(z)
        site_opts = []
        if old is None:
            if n_b == 0:
                colorings = [(RED, Fraction(1))]
            elif n_r == 0:
                colorings = [(BLUE, Fraction(1))]
            else:
                colorings = _tie_outcomes(config.tie_break, n_r, n_b)
            recolor = config.same_step_recolor and n_r > 0 and n_b > 0
        else:
            colorings = [(old[0], Fraction(1))]
            recolor = True
        for site, wc in colorings:
            if recolor:
                opposing = n_b if site == RED else n_r
                for j, wj in _binomial_pmf(opposing, p):
                    if site == RED:
                        site_opts.append((site, n_r + j, n_b - j, wc * wj))
                    else:
                        site_opts.append((site, n_r - j, n_b + j, wc * wj))
            else:
                site_opts.append((site, n_r, n_b, wc))
        options.append((z, old is None, site_opts))

    for combo in itertools.product(*(opts for _, _, opts in options)):
        w = Fraction(1)
        new_colors = dict(colors)
        particles = []
        for (z, is_new, _), (site, r, b, wz) in zip(options, combo):
            w *= wz
            if is_new:
                new_colors[z] = (site, t + 1)
            if r or b:
                particles.append((z, (r, b)))
        if w:
            yield (tuple(sorted(new_colors.items())), tuple(particles)), w


def total_variation(empirical: Mapping[bytes, float], exact: Mapping[bytes, Fraction]) -> float:
    """Half the L1 distance; ``empirical`` may hold raw counts or frequencies."""
    total = float(sum(empirical.values()))
    if total <= 0:
        raise ValueError("empirical distribution is empty")
    keys = set(empirical) | set(exact)
    return 0.5 * sum(abs(empirical.get(k, 0) / total - float(exact.get(k, 0))) for k in keys)


def marginals(summary: RunSummary) -> dict[str, int]:
    """Scalar summaries compared between engine and oracle."""
    last = summary.last
    return {
        "total_particles": last.total_particles,
        "colored": last.colored_red + last.colored_blue,
        "max_radius": max(last.max_radius_red, last.max_radius_blue),
    }


def _merged_bins(a: Counter, b: Counter, min_expected: float) -> list[tuple[int, int]]:
    """Adjacent values pooled until every expected cell count reaches ``min_expected``."""
    na, nb = sum(a.values()), sum(b.values())
    frac_a, frac_b = na / (na + nb), nb / (na + nb)
    bins, cur = [], [0, 0]
    for v in sorted(set(a) | set(b)):
        cur[0] += a.get(v, 0)
        cur[1] += b.get(v, 0)
        tot = cur[0] + cur[1]
        if tot * min(frac_a, frac_b) >= min_expected:
            bins.append(tuple(cur))
            cur = [0, 0]
    if cur[0] or cur[1]:
        if bins:
            last = bins.pop()
            bins.append((last[0] + cur[0], last[1] + cur[1]))
        else:
            bins.append(tuple(cur))
    return bins


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    pvalue: float
    dof: int


def chi_square_two_sample(a: Sequence[int], b: Sequence[int], min_expected: float = 5.0) -> ChiSquare:
    """Two-sample chi-square homogeneity test on integer samples, sparse tails pooled."""
    bins = _merged_bins(Counter(a), Counter(b), min_expected)
    if len(bins) < 2:
        return ChiSquare(0.0, 1.0, 0)
    res = chi2_contingency([[x for x, _ in bins], [y for _, y in bins]], correction=False)
    return ChiSquare(float(res.statistic), float(res.pvalue), int(res.dof))
