"""Reproduction laws: offspring-count and displacement distributions.

Probabilities are stored as exact :class:`fractions.Fraction` values. Floats
only appear when a law is handed to the sampler.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

Site = tuple[int, ...]


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions, ``"a/b"`` strings and ``[a, b]`` pairs."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, float):
        # floats are accepted only when they are exact binary fractions
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class ReproductionLaw:
    """Offspring pmf plus displacement pmf on a finite set K of Z^d.

    Both pmfs are kept as sorted tuples of ``(value, probability)`` pairs so
    the law is hashable and compares structurally.
    """

    dimension: int
    offspring_pmf: tuple[tuple[int, Fraction], ...]
    displacement_pmf: tuple[tuple[Site, Fraction], ...]

    @classmethod
    def make(
        cls,
        dimension: int,
        offspring: Mapping[int, object],
        displacement: Mapping[Sequence[int], object],
    ) -> "ReproductionLaw":
        off: dict[int, Fraction] = {}
        for k, w in offspring.items():
            off[int(k)] = off.get(int(k), Fraction(0)) + as_fraction(w)
        disp: dict[Site, Fraction] = {}
        for y, w in displacement.items():
            y = tuple(int(c) for c in y)
            disp[y] = disp.get(y, Fraction(0)) + as_fraction(w)
        return cls(
            int(dimension),
            tuple(sorted(off.items())),
            tuple(sorted(disp.items())),
        )

    @property
    def offspring(self) -> dict[int, Fraction]:
        return dict(self.offspring_pmf)

    @property
    def displacement(self) -> dict[Site, Fraction]:
        return dict(self.displacement_pmf)

    @property
    def support(self) -> list[Site]:
        """The displacement support K."""
        return [y for y, _ in self.displacement_pmf]


def nearest_neighbors(d: int) -> list[Site]:
    out = []
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            out.append(tuple(e))
    return out


def uniform_law(d: int, offspring: Mapping[int, object], sites: Iterable[Sequence[int]]) -> ReproductionLaw:
    sites = [tuple(s) for s in sites]
    w = Fraction(1, len(sites))
    return ReproductionLaw.make(d, offspring, {s: w for s in sites})


def nearest_neighbor_law(d: int, offspring: Mapping[int, object] | None = None) -> ReproductionLaw:
    """Uniform displacement over the 2d nearest neighbours; default offspring delta_2."""
    return uniform_law(d, offspring or {2: 1}, nearest_neighbors(d))


# validation -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


# machine-readable violation codes
PMF_NONPOSITIVE = "pmf_nonpositive"
PMF_SUM = "pmf_sum"
OFFSPRING_ZERO = "offspring_support_includes_0"
OFFSPRING_MEAN = "offspring_mean_not_above_1"
DISPLACEMENT_DIMENSION = "displacement_dimension"
DISPLACEMENT_EMPTY = "displacement_empty"
MISSING_NEIGHBOR = "missing_neighbor"
D1_EXTENSION = "d1_p1_extension"
DIMENSION_MISMATCH = "dimension_mismatch"


def validate_law(law: ReproductionLaw, d: int | None = None, p=None) -> ValidationReport:
    """Check every standing assumption on a reproduction law.

    Violations are returned as data; nothing is raised. ``p`` only matters in
    one dimension, where ``p == 1`` requires a non-neighbour site on each side
    of the origin (a warning is emitted for ``0 < p < 1``).
    """
    rep = ValidationReport()
    bad = rep.violations.append
    d = law.dimension if d is None else d
    if law.dimension != d:
        bad(Violation(DIMENSION_MISMATCH, f"law has dimension {law.dimension}, expected {d}"))

    for name, pmf in (("offspring", law.offspring_pmf), ("displacement", law.displacement_pmf)):
        nonpos = [v for v, w in pmf if w <= 0]
        if nonpos:
            bad(Violation(PMF_NONPOSITIVE, f"{name} pmf has non-positive mass at {nonpos}"))
        total = sum((w for _, w in pmf), Fraction(0))
        if total != 1:
            bad(Violation(PMF_SUM, f"{name} pmf sums to {total}, not 1"))

    ks = [k for k, w in law.offspring_pmf if w > 0]
    if any(k <= 0 for k in ks):
        bad(Violation(OFFSPRING_ZERO, "offspring support includes 0 (or a negative count)"))
    if law.offspring_pmf and offspring_mean(law) <= 1:
        bad(Violation(OFFSPRING_MEAN, f"offspring mean {offspring_mean(law)} is not > 1"))

    support = [y for y, w in law.displacement_pmf if w > 0]
    if not support:
        bad(Violation(DISPLACEMENT_EMPTY, "displacement support is empty"))
    wrong = [y for y in support if len(y) != law.dimension]
    if wrong:
        bad(Violation(DISPLACEMENT_DIMENSION, f"sites {wrong} do not have dimension {law.dimension}"))
    missing = [e for e in nearest_neighbors(law.dimension) if e not in set(support)]
    if missing:
        bad(Violation(MISSING_NEIGHBOR, f"K lacks nearest neighbours {missing}"))

    if law.dimension == 1 and p is not None:
        p = as_fraction(p)
        far_right = any(y[0] >= 2 for y in support)
        far_left = any(y[0] <= -2 for y in support)
        if not (far_right and far_left):
            msg = "d=1 needs a non-neighbour site of K in each direction"
            if p == 1:
                bad(Violation(D1_EXTENSION, msg + " when p=1"))
            elif p > 0:
                rep.warnings.append(Violation(D1_EXTENSION, msg + " (required only for p=1)"))
    return rep


class LawError(ValueError):
    """Raised when an invalid law is used where a valid one is required."""

    def __init__(self, report: ValidationReport, who: str = "law"):
        self.report = report
        super().__init__(f"{who}: " + "; ".join(f"[{v.code}] {v.message}" for v in report.violations))


def require_valid(law: ReproductionLaw, d: int | None = None, p=None, who: str = "law") -> ReproductionLaw:
    rep = validate_law(law, d, p)
    if not rep.ok:
        raise LawError(rep, who)
    return law


# exact derived quantities ---------------------------------------------------

def offspring_mean(law_or_pmf) -> Fraction:
    pmf = _pmf_items(law_or_pmf)
    return sum((k * w for k, w in pmf), Fraction(0))


def _pmf_items(law_or_pmf):
    if isinstance(law_or_pmf, ReproductionLaw):
        return law_or_pmf.offspring_pmf
    if isinstance(law_or_pmf, Mapping):
        return list(law_or_pmf.items())
    return list(law_or_pmf)


def _tail(pmf: Mapping[int, Fraction], k: int) -> Fraction:
    return sum((w for j, w in pmf.items() if j >= k), Fraction(0))


def min_coupling_law(red_law: ReproductionLaw, blue_law: ReproductionLaw) -> ReproductionLaw:
    """Law of min(X, Y) for independent X ~ red offspring, Y ~ blue offspring.

    Uses the tail identity ``P(min >= k) = P(X >= k) P(Y >= k)``. Both laws
    must share their displacement distribution.
    """
    if red_law.displacement_pmf != blue_law.displacement_pmf:
        raise ValueError("coupling requires identical displacement law")
    a, b = red_law.offspring, blue_law.offspring
    ks = sorted(set(a) | set(b))
    pmf = {}
    for k in ks:
        w = _tail(a, k) * _tail(b, k) - _tail(a, k + 1) * _tail(b, k + 1)
        if w:
            pmf[k] = w
    return ReproductionLaw(red_law.dimension, tuple(sorted(pmf.items())), red_law.displacement_pmf)


def pgf_eval(pmf, s):
    """Probability generating function ``sum_k pmf(k) s^k``.

    Exact when ``s`` is a Fraction, float otherwise.
    """
    if not 0 <= s <= 1:
        raise ValueError(f"pgf argument {s} outside [0, 1]")
    items = _pmf_items(pmf)
    if isinstance(s, (Fraction, int)):
        s = Fraction(s)
        return sum((as_fraction(w) * s**k for k, w in items), Fraction(0))
    return float(sum(float(w) * s**k for k, w in items))


# two-type configuration -----------------------------------------------------

RED, BLUE = "red", "blue"
TIE_BREAKS = ("coin", "red_wins", "blue_wins", "proportional")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialCell:
    site: Site
    color: str
    count: int = 1


@dataclass(frozen=True)
class CountMode:
    """``exact`` aborts on 64-bit overflow; ``capped`` clamps counts at ``cap``."""

    kind: str = "exact"
    cap: Optional[int] = None

    @classmethod
    def parse(cls, text: "str | CountMode") -> "CountMode":
        if isinstance(text, CountMode):
            return text
        if text == "exact":
            return cls()
        if text.startswith("capped:"):
            cap = int(text.split(":", 1)[1])
            return cls("capped", cap)
        raise ConfigError(f"unknown count mode {text!r} (use exact or capped:CAP)")

    def __str__(self) -> str:
        return "exact" if self.kind == "exact" else f"capped:{self.cap}"

    def __post_init__(self):
        if self.kind not in ("exact", "capped"):
            raise ConfigError(f"unknown count mode {self.kind!r}")
        if self.kind == "capped" and not (self.cap and 0 < self.cap < 2**62):
            raise ConfigError("capped mode needs 0 < cap < 2**62")


@dataclass(frozen=True)
class TwoTypeConfig:
    """Everything that determines a run apart from the horizon.

    ``blue_law=None`` gives a single-type (red) process. ``initial=None``
    selects the standard start: one red particle at the origin and one blue
    particle at (1, 0, ..., 0), each site colored by its occupant. Set
    ``validate=False`` to run laws that break the standing assumptions
    (deterministic movers and the like in engine tests).
    """

    red_law: ReproductionLaw
    blue_law: Optional[ReproductionLaw] = None
    p: Fraction = Fraction(0)
    tie_break: str = "coin"
    initial: Optional[tuple[InitialCell, ...]] = None
    precolored: tuple[tuple[Site, str], ...] = ()
    master_seed: int = 0
    count_mode: CountMode = CountMode()
    same_step_recolor: bool = False
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        object.__setattr__(self, "count_mode", CountMode.parse(self.count_mode))
        if self.initial is not None:
            cells = tuple(c if isinstance(c, InitialCell) else InitialCell(tuple(c[0]), c[1], int(c[2]))
                          for c in self.initial)
            object.__setattr__(self, "initial", cells)
        object.__setattr__(self, "precolored", tuple((tuple(map(int, z)), c) for z, c in self.precolored))
        if not 0 <= self.p <= 1:
            raise ConfigError(f"p={self.p} outside [0, 1]")
        if self.tie_break not in TIE_BREAKS:
            raise ConfigError(f"unknown tie-break {self.tie_break!r}; choose from {TIE_BREAKS}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        d = self.red_law.dimension
        if self.blue_law is not None and self.blue_law.dimension != d:
            raise ConfigError("red and blue laws have different dimensions")
        for cell in self.initial or ():
            if len(cell.site) != d or cell.color not in (RED, BLUE) or cell.count < 0:
                raise ConfigError(f"bad initial entry {cell}")
            if cell.color == BLUE and self.blue_law is None:
                raise ConfigError("blue particles in the initial condition but no blue law")
        for site, color in self.precolored:
            if len(site) != d or color not in (RED, BLUE):
                raise ConfigError(f"bad pre-colored entry {(site, color)}")
        if self.validate:
            require_valid(self.red_law, d, self.p, who="red law")
            if self.blue_law is not None:
                require_valid(self.blue_law, d, self.p, who="blue law")

    @property
    def dimension(self) -> int:
        return self.red_law.dimension

    @property
    def two_type(self) -> bool:
        return self.blue_law is not None

    def law(self, color: str) -> ReproductionLaw:
        return self.red_law if color == RED else self.blue_law

    def initial_cells(self) -> tuple[InitialCell, ...]:
        if self.initial is not None:
            return self.initial
        d = self.dimension
        origin = (0,) * d
        cells = [InitialCell(origin, RED, 1)]
        if self.blue_law is not None:
            cells.append(InitialCell((1,) + (0,) * (d - 1), BLUE, 1))
        return tuple(cells)

    def replace(self, **changes) -> "TwoTypeConfig":
        from dataclasses import replace

        return replace(self, **changes)
