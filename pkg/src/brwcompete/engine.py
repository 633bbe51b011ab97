"""Generation-by-generation dynamics of the two-type competition process.

Particles are never tracked individually. Each site carries a red and a blue
particle count, and a generation is sampled per site:

* the offspring of ``n`` parents: ``Multinomial(n, mu)`` gives how many parents
  had ``k`` children, so the child total is a dot product with the support;
* the placement of ``c`` children: ``Multinomial(c, nu)`` over the displacement
  set ``K``.

Because offspring counts and placements are i.i.d. per particle, this has
exactly the law of the per-particle process, at a cost that scales with the
number of occupied sites rather than the number of particles.

The sparse lattice is a sorted array of packed integer site keys with aligned
colour/birth/count columns. Sorting the keys means sites are always visited in
lexicographic order, so a run is a deterministic function of the seed.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import rng as rngmod
from .laws import BLUE, RED, ConfigError, ReproductionLaw, TwoTypeConfig

UNCOLORED, RED_CODE, BLUE_CODE = 0, 1, 2
COLOR_NAMES = {UNCOLORED: "uncolored", RED_CODE: RED, BLUE_CODE: BLUE}
COLOR_CODES = {RED: RED_CODE, BLUE: BLUE_CODE}
PRECOLORED_BIRTH = -1

INT64_MAX = np.iinfo(np.int64).max
# float shadow sums above this may not fit in int64
_FLOAT_LIMIT = float(2**63) * (1 - 1e-9)


class CountOverflowError(OverflowError):
    """A per-site particle count left the 64-bit range in exact mode."""


class SiteCodec:
    """Packs integer coordinates into one sortable int64.

    Each coordinate gets ``63 // d`` bits with an offset, most significant
    coordinate first, so integer order of keys is lexicographic order of
    sites and a displacement is a plain integer addition.
    """

    def __init__(self, d: int):
        if not 1 <= d <= 6:
            raise ConfigError("dimension must be between 1 and 6")
        self.d = d
        self.bits = 63 // d
        self.offset = 1 << (self.bits - 1)
        self.mask = (1 << self.bits) - 1
        self.shifts = [self.bits * (d - 1 - i) for i in range(d)]
        self.limit = self.offset - 64

    def encode(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.d)
        if coords.size and np.abs(coords).max() >= self.limit:
            raise OverflowError("site outside the encodable lattice window")
        keys = np.zeros(len(coords), dtype=np.int64)
        for i, s in enumerate(self.shifts):
            keys += (coords[:, i] + self.offset) << s
        return keys

    def decode(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty((len(keys), self.d), dtype=np.int64)
        for i, s in enumerate(self.shifts):
            out[:, i] = ((keys >> s) & self.mask) - self.offset
        return out

    def delta(self, y: Sequence[int]) -> int:
        return sum(int(c) << s for c, s in zip(y, self.shifts))


class _CompiledLaw:
    __slots__ = ("k", "k_f", "k_prob", "d_keys", "d_prob", "max_step")

    def __init__(self, law: ReproductionLaw, codec: SiteCodec):
        self.k = np.array([k for k, _ in law.offspring_pmf], dtype=np.int64)
        self.k_f = self.k.astype(np.float64)
        self.k_prob = np.array([float(w) for _, w in law.offspring_pmf])
        self.d_keys = np.array([codec.delta(y) for y, _ in law.displacement_pmf], dtype=np.int64)
        self.d_prob = np.array([float(w) for _, w in law.displacement_pmf])
        self.max_step = max(max(abs(c) for c in y) for y, _ in law.displacement_pmf)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    red_particles: int
    blue_particles: int
    new_red: int
    new_blue: int
    colored_red: int
    colored_blue: int
    visited: int
    max_radius_red: int
    max_radius_blue: int
    occupied: int

    @property
    def total_particles(self) -> int:
        return self.red_particles + self.blue_particles

    def as_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


@dataclass
class LatticeState:
    """Sparse lattice: only colored sites are stored.

    Columns are aligned with ``keys`` (sorted). A site missing from ``keys``
    is uncolored and empty. ``birth`` is the generation the site was colored,
    ``-1`` for sites pre-colored without ever being visited.
    """

    codec: SiteCodec
    generation: int
    keys: np.ndarray
    color: np.ndarray
    birth: np.ndarray
    visited: np.ndarray
    red: np.ndarray
    blue: np.ndarray
    history: list[GenerationStats] = field(default_factory=list)
    approximate: bool = False

    @property
    def dimension(self) -> int:
        return self.codec.d

    def sites(self, mask=None) -> list[tuple[int, ...]]:
        keys = self.keys if mask is None else self.keys[mask]
        return [tuple(z) for z in self.codec.decode(keys).tolist()]

    @property
    def cells(self) -> dict[tuple[int, ...], tuple[str, int, int]]:
        return {
            z: (COLOR_NAMES[int(c)], int(r), int(b))
            for z, c, r, b in zip(self.sites(), self.color, self.red, self.blue)
        }

    @property
    def color_birth(self) -> dict[tuple[int, ...], int]:
        return {z: int(b) for z, b in zip(self.sites(), self.birth)}

    @property
    def red_total(self) -> int:
        return sum(self.red.tolist())

    @property
    def blue_total(self) -> int:
        return sum(self.blue.tolist())

    @property
    def total_particles(self) -> int:
        return self.red_total + self.blue_total

    def copy(self) -> "LatticeState":
        return LatticeState(
            self.codec, self.generation, self.keys.copy(), self.color.copy(), self.birth.copy(),
            self.visited.copy(), self.red.copy(), self.blue.copy(), list(self.history), self.approximate,
        )


def _radius(codec: SiteCodec, keys: np.ndarray) -> int:
    if keys.size == 0:
        return 0
    return int(np.abs(codec.decode(keys)).max())


def _stats(state: LatticeState, new_red: int, new_blue: int, prev: Optional[GenerationStats],
           new_red_keys: np.ndarray, new_blue_keys: np.ndarray) -> GenerationStats:
    rr = _radius(state.codec, new_red_keys)
    rb = _radius(state.codec, new_blue_keys)
    if prev is not None:
        rr, rb = max(rr, prev.max_radius_red), max(rb, prev.max_radius_blue)
    return GenerationStats(
        generation=state.generation,
        red_particles=state.red_total,
        blue_particles=state.blue_total,
        new_red=new_red,
        new_blue=new_blue,
        colored_red=int(np.count_nonzero(state.color == RED_CODE)),
        colored_blue=int(np.count_nonzero(state.color == BLUE_CODE)),
        visited=int(np.count_nonzero(state.visited)),
        max_radius_red=rr,
        max_radius_blue=rb,
        occupied=int(np.count_nonzero((state.red > 0) | (state.blue > 0))),
    )


def init_state(config: TwoTypeConfig) -> LatticeState:
    """Lattice at generation 0: initial particles plus any pre-colored sites."""
    codec = SiteCodec(config.dimension)
    colors: dict[tuple, str] = {}
    counts: dict[tuple, list[int]] = {}
    for site, color in config.precolored:
        if colors.setdefault(site, color) != color:
            raise ConfigError(f"site {site} pre-colored both red and blue")
    for cell in config.initial_cells():
        have = colors.setdefault(cell.site, cell.color)
        if have != cell.color:
            raise ConfigError(f"{cell.color} particles at {cell.site}, which is colored {have}")
        c = counts.setdefault(cell.site, [0, 0])
        c[0 if cell.color == RED else 1] += cell.count

    sites = sorted(colors)
    keys = codec.encode(sites) if sites else np.zeros(0, dtype=np.int64)
    n = len(sites)
    state = LatticeState(
        codec=codec,
        generation=0,
        keys=keys,
        color=np.array([COLOR_CODES[colors[z]] for z in sites], dtype=np.int8),
        birth=np.array([0 if z in counts else PRECOLORED_BIRTH for z in sites], dtype=np.int64),
        visited=np.array([z in counts for z in sites], dtype=bool),
        red=np.array([counts.get(z, (0, 0))[0] for z in sites], dtype=np.int64).reshape(n),
        blue=np.array([counts.get(z, (0, 0))[1] for z in sites], dtype=np.int64).reshape(n),
    )
    # initial particle sites count as newly colored at generation 0
    vis = state.visited
    new_r = vis & (state.color == RED_CODE)
    new_b = vis & (state.color == BLUE_CODE)
    state.history.append(_stats(state, int(new_r.sum()), int(new_b.sum()), None, keys[new_r], keys[new_b]))
    return state


class _Counts:
    """Overflow policy shared by every integer accumulation in a step."""

    def __init__(self, mode):
        self.capped = mode.kind == "capped"
        self.cap = mode.cap
        self.clipped = False

    def guard(self, exact: np.ndarray, shadow: np.ndarray) -> np.ndarray:
        over = shadow >= _FLOAT_LIMIT
        if over.any():
            if not self.capped:
                raise CountOverflowError("per-site particle count exceeds the 64-bit range")
            exact = exact.copy()
            exact[over] = self.cap
        if self.capped:
            hit = exact > self.cap
            if hit.any():
                self.clipped = True
                exact = np.minimum(exact, self.cap)
        return exact


def _aggregate(dest: np.ndarray, cnt: np.ndarray, counts: _Counts):
    order = np.argsort(dest, kind="stable")
    dest, cnt = dest[order], cnt[order]
    if dest.size == 0:
        return dest, cnt
    starts = np.flatnonzero(np.r_[True, dest[1:] != dest[:-1]])
    sums = np.add.reduceat(cnt, starts)
    shadow = np.add.reduceat(cnt.astype(np.float64), starts)
    return dest[starts], counts.guard(sums, shadow)


def _multinomial(gen: np.random.Generator, n: np.ndarray, prob: np.ndarray) -> np.ndarray:
    """Row-wise ``Multinomial(n[i], prob)`` by conditional binomials, one column at a time.

    Same law as ``Generator.multinomial`` but vectorised across rows, which is
    much faster when there are many rows and few categories.
    """
    out = np.empty((n.size, prob.size), dtype=np.int64)
    remaining = n.copy()
    rest = 1.0
    for j in range(prob.size - 1):
        q = min(1.0, prob[j] / rest) if rest > 0 else 1.0
        out[:, j] = gen.binomial(remaining, q)
        remaining -= out[:, j]
        rest -= prob[j]
    out[:, -1] = remaining
    return out


def _branch(gen: np.random.Generator, keys: np.ndarray, parents: np.ndarray, law: _CompiledLaw,
            counts: _Counts):
    """Sample one generation of offspring from the occupied sites ``keys``."""
    empty = np.zeros(0, dtype=np.int64)
    if keys.size == 0:
        return empty, empty
    if law.k.size == 1:
        children = parents * law.k[0]
        shadow = parents.astype(np.float64) * law.k_f[0]
    else:
        m = _multinomial(gen, parents, law.k_prob)
        children = m @ law.k
        shadow = m.astype(np.float64) @ law.k_f
    children = counts.guard(children, shadow)
    if law.d_keys.size == 1:
        placed = children[:, None]
    else:
        placed = _multinomial(gen, children, law.d_prob)
    dest = keys[:, None] + law.d_keys[None, :]
    hit = placed > 0
    return _aggregate(dest[hit], placed[hit], counts)


class Engine:
    """Steps a :class:`LatticeState` under one configuration."""

    def __init__(self, config: TwoTypeConfig):
        self.config = config
        self.codec = SiteCodec(config.dimension)
        self.red = _CompiledLaw(config.red_law, self.codec)
        self.blue = _CompiledLaw(config.blue_law, self.codec) if config.blue_law is not None else None
        self.p = float(config.p)
        self.max_step = max(self.red.max_step, self.blue.max_step if self.blue else 0)

    def step(self, state: LatticeState, gen: np.random.Generator) -> LatticeState:
        cfg = self.config
        counts = _Counts(cfg.count_mode)
        prev = state.history[-1] if state.history else None
        if prev is not None and max(prev.max_radius_red, prev.max_radius_blue) + self.max_step >= self.codec.limit:
            raise OverflowError("process left the encodable lattice window")

        occ = state.red > 0
        rk, rc = _branch(gen, state.keys[occ], state.red[occ], self.red, counts)
        occ = state.blue > 0
        if self.blue is not None:
            bk, bc = _branch(gen, state.keys[occ], state.blue[occ], self.blue, counts)
        else:
            bk = bc = np.zeros(0, dtype=np.int64)

        uk = np.union1d(rk, bk)
        ra = np.zeros(uk.size, dtype=np.int64)
        ba = np.zeros(uk.size, dtype=np.int64)
        ra[np.searchsorted(uk, rk)] = rc
        ba[np.searchsorted(uk, bk)] = bc

        n_old = state.keys.size
        pos = np.searchsorted(state.keys, uk)
        posc = np.minimum(pos, max(n_old - 1, 0))
        found = (pos < n_old) & (state.keys[posc] == uk) if n_old else np.zeros(uk.size, dtype=bool)
        new = ~found

        # coloring of first-reached sites
        site_color = np.zeros(uk.size, dtype=np.int8)
        site_color[found] = state.color[posc[found]]
        tie = new & (ra > 0) & (ba > 0)
        site_color[new & (ra > 0) & (ba == 0)] = RED_CODE
        site_color[new & (ba > 0) & (ra == 0)] = BLUE_CODE
        if tie.any():
            site_color[tie] = self._tie_break(gen, ra[tie], ba[tie])

        # recoloring of particles landing on the opposite color
        eligible = found | tie if cfg.same_step_recolor else found
        on_red = eligible & (site_color == RED_CODE) & (ba > 0)
        on_blue = eligible & (site_color == BLUE_CODE) & (ra > 0)
        if self.p > 0 and (on_red.any() or on_blue.any()):
            idx = np.flatnonzero(on_red | on_blue)
            opposing = np.where(site_color[idx] == RED_CODE, ba[idx], ra[idx])
            switched = opposing if self.p == 1 else gen.binomial(opposing, self.p)
            to_red = site_color[idx] == RED_CODE
            gain_r = np.where(to_red, switched, 0)
            gain_b = switched - gain_r
            shadow_r = ra[idx].astype(np.float64) + gain_r
            shadow_b = ba[idx].astype(np.float64) + gain_b
            ra[idx] = counts.guard(ra[idx] + gain_r - gain_b, shadow_r)
            ba[idx] = counts.guard(ba[idx] + gain_b - gain_r, shadow_b)

        # merge newly colored sites into the sorted columns
        t1 = state.generation + 1
        new_keys = uk[new]
        new_colors = site_color[new]
        visited = state.visited.copy()
        visited[posc[found]] = True
        keys = np.concatenate([state.keys, new_keys])
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        color = np.concatenate([state.color, new_colors])[order]
        birth = np.concatenate([state.birth, np.full(new_keys.size, t1, dtype=np.int64)])[order]
        visited = np.concatenate([visited, np.ones(new_keys.size, dtype=bool)])[order]
        red = np.zeros(keys.size, dtype=np.int64)
        blue = np.zeros(keys.size, dtype=np.int64)
        at = np.searchsorted(keys, uk)
        red[at] = ra
        blue[at] = ba

        out = LatticeState(self.codec, t1, keys, color, birth, visited, red, blue,
                           state.history, state.approximate or counts.clipped)
        nr = new_keys[new_colors == RED_CODE]
        nb = new_keys[new_colors == BLUE_CODE]
        out.history = state.history + [_stats(out, nr.size, nb.size, prev, nr, nb)]
        return out

    def _tie_break(self, gen: np.random.Generator, r: np.ndarray, b: np.ndarray) -> np.ndarray:
        rule = self.config.tie_break
        if rule == "red_wins":
            return np.full(r.size, RED_CODE, dtype=np.int8)
        if rule == "blue_wins":
            return np.full(r.size, BLUE_CODE, dtype=np.int8)
        u = gen.random(r.size)
        if rule == "coin":
            red_wins = u < 0.5
        else:
            rf = r.astype(np.float64)
            red_wins = u * (rf + b.astype(np.float64)) < rf
        return np.where(red_wins, RED_CODE, BLUE_CODE).astype(np.int8)


def step(state: LatticeState, config: TwoTypeConfig, gen: np.random.Generator) -> LatticeState:
    return Engine(config).step(state, gen)


# runs -----------------------------------------------------------------------

Observer = Callable[[LatticeState], None]


@dataclass
class RunSummary:
    horizon: int
    replication: int
    seed: int
    history: list[GenerationStats]
    digest: str
    final: Optional[LatticeState] = None
    approximate: bool = False
    error: Optional[str] = None
    occupancy: Optional[bytes] = None
    colored: Optional[bytes] = None

    def __post_init__(self):
        if self.final is not None:
            if self.occupancy is None:
                self.occupancy = state_digest(self.final)
            if self.colored is None:
                self.colored = state_digest(self.final, occupied_only=False)

    @property
    def last(self) -> GenerationStats:
        return self.history[-1]

    def as_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "replication": self.replication,
            "seed": self.seed,
            "digest": self.digest,
            "approximate": self.approximate,
            "error": self.error,
            "history": [h.as_dict() for h in self.history],
        }


def format_digest(rows) -> bytes:
    """Serialise ``(site, color_name, red, blue)`` rows, already in site order."""
    return "\n".join(f"{tuple(z)}|{c}|{r}|{b}" for z, c, r, b in rows).encode()


def state_digest(state: LatticeState, occupied_only: bool = True) -> bytes:
    """Canonical byte string of a state.

    Lexicographically sorted ``(site, color, red, blue)`` tuples. By default
    only occupied sites are included, so two states with the same particles
    compare equal whatever their coloring history; ``occupied_only=False``
    adds every colored site.
    """
    mask = (state.red > 0) | (state.blue > 0) if occupied_only else np.ones(state.keys.size, dtype=bool)
    rows = zip(state.sites(mask), (COLOR_NAMES[c] for c in state.color[mask].tolist()),
               state.red[mask].tolist(), state.blue[mask].tolist())
    return format_digest(rows)


def full_digest(state: LatticeState) -> str:
    """SHA-256 over every stored column (keys, colors, births, visits, counts).

    The columns are sorted by site key, so equal states hash equally.
    """
    h = hashlib.sha256()
    h.update(state.generation.to_bytes(8, "little"))
    for col in (state.keys, state.color, state.birth, state.visited, state.red, state.blue):
        h.update(np.ascontiguousarray(col).astype(col.dtype.newbyteorder("<"), copy=False).tobytes())
    return h.hexdigest()


def run(config: TwoTypeConfig, horizon: int, observers: Iterable[Observer] = (),
        replication: int = 0, keep_state: bool = True) -> RunSummary:
    """Run ``horizon`` generations of replication ``replication``.

    Generation ``t`` draws from ``rng.generator(seed, ENGINE, t)`` where
    ``seed = rng.replication_seed(master_seed, replication)``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    seed = rngmod.replication_seed(config.master_seed, replication)
    engine = Engine(config)
    state = init_state(config)
    observers = list(observers)
    for obs in observers:
        obs(state)
    for t in range(horizon):
        state = engine.step(state, rngmod.generator(seed, rngmod.ENGINE, t))
        for obs in observers:
            obs(state)
    return RunSummary(
        horizon=horizon,
        replication=replication,
        seed=seed,
        history=state.history,
        digest=full_digest(state),
        final=state if keep_state else None,
        approximate=state.approximate,
    )


def colored_snapshot(state: LatticeState) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Sites currently colored red and blue, each in lexicographic order."""
    return state.sites(state.color == RED_CODE), state.sites(state.color == BLUE_CODE)


def newly_colored(state: LatticeState) -> np.ndarray:
    """Keys of sites colored in the most recent generation."""
    return state.keys[state.birth == state.generation]
