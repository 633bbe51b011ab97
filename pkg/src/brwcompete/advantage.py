"""Exact microscopic advantage geometry between two reproduction laws.

Directions are nonzero integer vectors, so every inner product, reach and
advantage-set membership below is exact integer arithmetic, and masses are
exact Fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .laws import ReproductionLaw, as_fraction, offspring_mean, pgf_eval

Vector = Sequence[int]


def _dot(x: Vector, y: Vector) -> int:
    return sum(a * b for a, b in zip(x, y))


def _check_direction(law: ReproductionLaw, x: Vector) -> tuple[int, ...]:
    x = tuple(int(c) for c in x)
    if len(x) != law.dimension:
        raise ValueError(f"direction {x} does not have dimension {law.dimension}")
    if not any(x):
        raise ValueError("direction must be a nonzero vector")
    return x


def reach(law: ReproductionLaw, x: Vector) -> int:
    """Largest ``<x, y>`` over the displacement support."""
    x = _check_direction(law, x)
    return max(_dot(x, y) for y in law.support)


def in_advantage_set(law: ReproductionLaw, x: Vector, y: Vector) -> bool:
    """Whether ``y`` lies strictly beyond the reach of ``law`` in direction ``x``."""
    x = _check_direction(law, x)
    return _dot(x, y) > reach(law, x)


def advantage_mass(attacker: ReproductionLaw, defender: ReproductionLaw, x: Vector) -> Fraction:
    """Expected number of attacker children placed beyond the defender's reach."""
    x = _check_direction(defender, x)
    if attacker.dimension != defender.dimension:
        raise ValueError("laws have different dimensions")
    rho = reach(defender, x)
    beyond = sum((w for y, w in attacker.displacement_pmf if _dot(x, y) > rho), Fraction(0))
    return offspring_mean(attacker) * beyond


@dataclass(frozen=True)
class AdvantageReport:
    direction: tuple[int, ...]
    rho_red: int
    rho_blue: int
    advantage_mass: Fraction
    reverse_mass: Fraction
    epsilon_gap: Optional[int]
    p_threshold: Optional[Fraction]

    @property
    def supercritical(self) -> bool:
        return self.advantage_mass > 1

    def format(self) -> str:
        """One-line ``key=value`` record."""
        fields = [
            ("direction", ",".join(map(str, self.direction))),
            ("rho_red", self.rho_red),
            ("rho_blue", self.rho_blue),
            ("advantage_mass", self.advantage_mass),
            ("reverse_mass", self.reverse_mass),
            ("epsilon_gap", "empty" if self.epsilon_gap is None else self.epsilon_gap),
            ("p_threshold", "none" if self.p_threshold is None else self.p_threshold),
        ]
        return " ".join(f"{k}={v}" for k, v in fields)


def supercritical_report(red_law: ReproductionLaw, blue_law: ReproductionLaw, x: Vector) -> AdvantageReport:
    """Blue's advantage over red in direction ``x``.

    ``p_threshold`` is ``(n - 1) / n`` for ``n = advantage_mass > 1``: below it
    the thinned blue process beyond red's reach is still supercritical.
    """
    x = _check_direction(red_law, x)
    rho_r = reach(red_law, x)
    n = advantage_mass(blue_law, red_law, x)
    beyond = [_dot(x, y) for y in blue_law.support if _dot(x, y) > rho_r]
    gap = min(beyond) - rho_r if beyond else None
    return AdvantageReport(
        direction=x,
        rho_red=rho_r,
        rho_blue=reach(blue_law, x),
        advantage_mass=n,
        reverse_mass=advantage_mass(red_law, blue_law, x),
        epsilon_gap=gap,
        p_threshold=(n - 1) / n if n > 1 else None,
    )


def thinned_offspring_pmf(offspring_pmf, keep_prob) -> dict[int, Fraction]:
    """Exact pmf after keeping each child independently with ``keep_prob``."""
    keep = as_fraction(keep_prob)
    items = offspring_pmf.offspring_pmf if isinstance(offspring_pmf, ReproductionLaw) else dict(offspring_pmf).items()
    out: dict[int, Fraction] = {}
    for k, w in items:
        w = as_fraction(w)
        for j in range(k + 1):
            out[j] = out.get(j, Fraction(0)) + w * math.comb(k, j) * keep**j * (1 - keep) ** (k - j)
    return {j: w for j, w in sorted(out.items()) if w}


def thinned_extinction_probability(offspring_pmf, keep_prob, tolerance: float = 1e-12,
                                   max_iter: int = 10**6) -> float:
    """Extinction probability of the Galton-Watson process with thinned offspring.

    Iterates ``q <- f(q)`` from ``q = 0`` where ``f`` is the pgf of the
    thinned law; the iterates increase to the smallest fixed point. Returns
    exactly 1.0 when the thinned mean is at most 1.
    """
    keep = as_fraction(keep_prob)
    if not 0 <= keep <= 1:
        raise ValueError(f"keep_prob {keep} outside [0, 1]")
    if isinstance(offspring_pmf, ReproductionLaw):
        pmf = dict(offspring_pmf.offspring_pmf)
    else:
        pmf = {int(k): as_fraction(w) for k, w in dict(offspring_pmf).items()}
    if offspring_mean(pmf) * keep <= 1:
        return 1.0
    # f(s) = E[(1 - keep + keep s)^X]
    kf = float(keep)
    terms = [(k, float(w)) for k, w in pmf.items()]
    q = 0.0
    for _ in range(max_iter):
        u = 1.0 - kf + kf * q
        nxt = sum(w * u**k for k, w in terms)
        if abs(nxt - q) < tolerance:
            return nxt
        q = nxt
    raise RuntimeError(f"fixed-point iteration did not converge in {max_iter} steps")


def thinned_pgf(offspring_pmf, keep_prob, s):
    """Pgf of the thinned law evaluated at ``s``; exact for Fraction input."""
    return pgf_eval(thinned_offspring_pmf(offspring_pmf, keep_prob), s)


def rho_max_squared(law: ReproductionLaw) -> int:
    return max(_dot(y, y) for y in law.support)


def rho_max(law: ReproductionLaw) -> float:
    """Largest reach over unit directions, i.e. the longest displacement.

    By Cauchy-Schwarz, ``max_{|x|=1} max_y <x, y>`` is attained at ``x = y/|y|``
    and equals ``max_y |y|``.
    """
    return math.sqrt(rho_max_squared(law))


class ReachBound(NamedTuple):
    value: float
    exponent: float
    vacuous: bool


def gw_reach_bound(red_law: ReproductionLaw, p, c: float, n: float) -> ReachBound:
    """First-moment bound ``((1-p) E[mu])^(c n / rho_max)`` on reaching distance ``c n``.

    The bound is not clamped; ``vacuous`` is set when the value is >= 1 and so
    carries no information.
    """
    if c <= 0 or n <= 0:
        raise ValueError("c and n must be positive")
    p = as_fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"p={p} outside [0, 1]")
    base = (1 - p) * offspring_mean(red_law)
    exponent = c * n / rho_max(red_law)
    value = float(base) ** exponent
    return ReachBound(value, exponent, value >= 1)
