import itertools
import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from brwcompete import fixtures as fx
from brwcompete.advantage import (
    advantage_mass,
    gw_reach_bound,
    in_advantage_set,
    reach,
    rho_max,
    supercritical_report,
    thinned_extinction_probability,
    thinned_offspring_pmf,
)
from brwcompete.laws import ReproductionLaw, nearest_neighbor_law, nearest_neighbors

NN = nearest_neighbor_law(2)


def random_law(rnd: random.Random, d: int) -> ReproductionLaw:
    sites = set(nearest_neighbors(d))
    for _ in range(rnd.randint(0, 4)):
        sites.add(tuple(rnd.randint(-3, 3) for _ in range(d)))
    weights = {y: rnd.randint(1, 6) for y in sites}
    total = sum(weights.values())
    ks = rnd.sample(range(1, 5), rnd.randint(1, 3))
    if ks == [1]:
        ks = [1, 3]
    kw = {k: rnd.randint(1, 4) for k in ks}
    kt = sum(kw.values())
    return ReproductionLaw.make(d, {k: F(w, kt) for k, w in kw.items()}, {y: F(w, total) for y, w in weights.items()})


def brute(red, blue, x):
    """Box enumeration with a for-all definition of the advantage set; independent of ``reach``."""
    d = len(x)
    box = list(itertools.product(range(-4, 5), repeat=d))
    rsupp, bsupp = dict(red.displacement_pmf), dict(blue.displacement_pmf)
    dot = lambda a, b: sum(i * j for i, j in zip(a, b))
    rho_r = next(dot(x, y) for y in rsupp if all(dot(x, y) >= dot(x, z) for z in rsupp))
    rho_b = next(dot(x, y) for y in bsupp if all(dot(x, y) >= dot(x, z) for z in bsupp))
    a_r = [y for y in box if all(dot(x, y) > dot(x, z) for z in rsupp)]
    a_b = [y for y in box if all(dot(x, y) > dot(x, z) for z in bsupp)]
    mean_b = sum(k * w for k, w in blue.offspring_pmf)
    mean_r = sum(k * w for k, w in red.offspring_pmf)
    n = mean_b * sum(bsupp.get(y, 0) for y in a_r)
    rev = mean_r * sum(rsupp.get(y, 0) for y in a_b)
    inside = [dot(x, y) for y in a_r if y in bsupp]
    gap = min(inside) - rho_r if inside else None
    thr = 1 - 1 / n if n > 1 else None
    return rho_r, rho_b, a_r, n, rev, gap, thr


def test_randomized_brute_force_agreement():
    rnd = random.Random(12345)
    cases = 0
    for _ in range(150):
        d = rnd.choice([1, 2, 3])
        red, blue = random_law(rnd, d), random_law(rnd, d)
        x = tuple(rnd.randint(-2, 2) for _ in range(d))
        if not any(x):
            continue
        rho_r, rho_b, a_r, n, rev, gap, thr = brute(red, blue, x)
        assert reach(red, x) == rho_r and reach(blue, x) == rho_b
        for y in itertools.product(range(-4, 5), repeat=d):
            assert in_advantage_set(red, x, y) == (y in a_r)
        assert advantage_mass(blue, red, x) == n
        rep = supercritical_report(red, blue, x)
        assert (rep.rho_red, rep.rho_blue, rep.advantage_mass, rep.reverse_mass, rep.epsilon_gap, rep.p_threshold) \
            == (rho_r, rho_b, n, rev, gap, thr)
        cases += 1
    assert cases >= 100


def test_reach_examples():
    assert reach(NN, (1, 0)) == 1
    assert reach(NN, (1, 1)) == 1
    assert reach(fx.blue_east_jumper(), (1, 0)) == 2
    with pytest.raises(ValueError):
        reach(NN, (0, 0))


def test_advantage_set_examples():
    assert in_advantage_set(NN, (1, 0), (2, 0))
    assert in_advantage_set(NN, (1, 1), (1, 1))
    for law in (NN, fx.blue_east_jumper(), fx.blue_diagonal_jumper()):
        for x in [(1, 0), (1, 1), (-2, 1), (0, -1)]:
            assert not any(in_advantage_set(law, x, y) for y in law.support)


def test_advantage_mass_examples():
    assert advantage_mass(fx.blue_east_jumper(), NN, (1, 0)) == F(3, 2)
    for x in [(1, 0), (0, 1), (1, -1)]:
        assert advantage_mass(NN, NN, x) == 0
    blue = ReproductionLaw.make(2, {2: 1}, {**{e: F(3, 16) for e in nearest_neighbors(2)}, (3, 0): F(1, 4)})
    assert advantage_mass(blue, NN, (1, 0)) == F(1, 2)


def test_report_examples_and_format():
    rep = supercritical_report(NN, fx.blue_east_jumper(), (1, 0))
    assert rep.p_threshold == F(1, 3) and rep.epsilon_gap == 1 and rep.supercritical
    assert "p_threshold=1/3" in rep.format() and "advantage_mass=3/2" in rep.format()
    weak = supercritical_report(NN, fx.blue_east_jumper(), (0, 1))
    assert weak.p_threshold is None and weak.epsilon_gap is None
    assert weak.format().endswith("epsilon_gap=empty p_threshold=none")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_homogeneity(seed, k):
    rnd = random.Random(seed)
    law = random_law(rnd, 2)
    x = (rnd.randint(-3, 3), rnd.randint(-3, 3))
    if not any(x):
        x = (1, 0)
    kx = tuple(k * c for c in x)
    assert reach(law, kx) == k * reach(law, x)
    for y in itertools.product(range(-4, 5), repeat=2):
        assert in_advantage_set(law, kx, y) == in_advantage_set(law, x, y)
    rep = supercritical_report(law, random_law(rnd, 2), x)
    if rep.epsilon_gap is not None:
        assert rep.epsilon_gap >= 1
    assert rep.advantage_mass >= 0
    assert (rep.p_threshold is not None) == (rep.advantage_mass > 1)


def test_thinned_extinction_quadratic_oracle():
    q = thinned_extinction_probability({2: 1}, F(3, 4))
    # 9/16 q^2 - 10/16 q + 1/16 = 0, smaller root
    a, b, c = 9 / 16, -10 / 16, 1 / 16
    root = (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
    assert abs(q - root) < 1e-10 and abs(q - 1 / 9) < 1e-10
    assert thinned_extinction_probability({2: 1}, 1) == 0.0
    assert thinned_extinction_probability({2: 1}, F(1, 2)) == 1.0
    assert thinned_extinction_probability({3: 1}, F(1, 4)) == 1.0
    assert thinned_offspring_pmf({2: 1}, F(3, 4)) == {0: F(1, 16), 1: F(6, 16), 2: F(9, 16)}
    with pytest.raises(ValueError):
        thinned_extinction_probability({2: 1}, F(5, 4))


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.integers(1, 5), st.integers(1, 5), min_size=1, max_size=3),
       st.fractions(0, 1, max_denominator=30), st.fractions(0, 1, max_denominator=30))
def test_extinction_monotone_in_keep(w, a, b):
    pmf = {k: F(v, sum(w.values())) for k, v in w.items()}
    lo, hi = min(a, b), max(a, b)
    q_lo, q_hi = thinned_extinction_probability(pmf, lo), thinned_extinction_probability(pmf, hi)
    assert q_hi <= q_lo + 1e-9
    mean = sum(k * p for k, p in pmf.items())
    assert (q_hi == 1.0) == (mean * hi <= 1)


def test_reach_bound_examples():
    one = gw_reach_bound(NN, F(1, 2), 0.7, 11)
    assert one.value == 1.0
    b = gw_reach_bound(NN, F(3, 4), 1.0, 3)
    assert b.value == pytest.approx(0.125, rel=1e-12) and not b.vacuous
    vac = gw_reach_bound(NN, 0, 0.5, 4)
    assert vac.value >= 1 and vac.vacuous


def test_rho_max_examples():
    assert rho_max(NN) == 1
    assert rho_max(fx.blue_east_jumper()) == 2
    diag = ReproductionLaw.make(2, {2: 1}, {**{e: F(1, 5) for e in nearest_neighbors(2)}, (1, 1): F(1, 5)})
    assert rho_max(diag) == math.sqrt(2)
