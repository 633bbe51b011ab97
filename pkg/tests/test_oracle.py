from collections import Counter
from fractions import Fraction as F

import pytest

from brwcompete import fixtures as fx
from brwcompete.engine import format_digest, run
from brwcompete.laws import ReproductionLaw, TwoTypeConfig
from brwcompete.oracle import (
    BudgetExceeded,
    chi_square_two_sample,
    enumerate_exact,
    simulate_per_particle,
    total_variation,
)

MOVER2 = ReproductionLaw.make(2, {2: 1}, {(1, 0): 1})


def occ(*rows):
    return format_digest(rows)


def test_enumerate_horizon_zero_and_coin_walk():
    cfg = fx.coin_walk_1d()
    assert enumerate_exact(cfg, 0) == {occ(((0,), "red", 1, 0)): 1}
    assert enumerate_exact(cfg, 1) == {occ(((-1,), "red", 1, 0)): F(1, 2), occ(((1,), "red", 1, 0)): F(1, 2)}
    two = enumerate_exact(cfg, 2)
    assert two == {occ(((-2,), "red", 1, 0)): F(1, 4), occ(((0,), "red", 1, 0)): F(1, 2),
                   occ(((2,), "red", 1, 0)): F(1, 4)}


@pytest.mark.parametrize("p", [0, F(1, 2), 1])
def test_enumeration_sums_to_one(p):
    for tie in ("coin", "proportional"):
        dist = enumerate_exact(fx.nn_line(p=p, tie_break=tie), 2)
        assert sum(dist.values()) == 1


def test_leaf_budget_guard():
    with pytest.raises(BudgetExceeded):
        enumerate_exact(fx.tiny_two_type(p=F(1, 2)), 2, leaf_budget=100)
    with pytest.raises(ValueError):
        enumerate_exact(fx.coin_walk_1d(), 3)


def test_total_variation_examples():
    exact = {b"A": F(1, 2), b"B": F(1, 2)}
    assert total_variation({b"A": 0.5, b"B": 0.5}, exact) == 0
    assert total_variation({b"C": 3}, exact) == 1
    assert total_variation({b"A": 0.6, b"B": 0.4}, exact) == pytest.approx(0.1, abs=1e-12)


def test_per_particle_deterministic_mover_matches_engine():
    cfg = TwoTypeConfig(MOVER2, MOVER2, validate=False)
    for p in (0, 1):
        a = simulate_per_particle(cfg.replace(p=p), 5)
        b = run(cfg.replace(p=p), 5)
        assert a.occupancy == b.occupancy and a.colored == b.colored
        assert a.history == b.history


def test_per_particle_coin_walk_frequency():
    cfg = fx.coin_walk_1d(master_seed=5)
    right = sum(simulate_per_particle(cfg, 1, replication=r).occupancy == occ(((1,), "red", 1, 0))
                for r in range(10**4))
    assert abs(right / 10**4 - 0.5) <= 0.02


def test_particle_budget():
    with pytest.raises(BudgetExceeded):
        simulate_per_particle(fx.symmetric_config(p=0), 20, particle_budget=1000)


def test_per_particle_converges_to_exact():
    # binomial fluctuation: E[TV] is about sum_k sqrt(p_k (1-p_k) / (2 pi n)), near 0.004 at n = 5e4
    cfg = fx.coin_walk_1d(master_seed=17)
    exact = enumerate_exact(cfg, 2)
    hist = Counter(simulate_per_particle(cfg, 2, replication=r).occupancy for r in range(5 * 10**4))
    assert total_variation(hist, exact) <= 0.01


def test_chi_square_merges_sparse_bins():
    same = chi_square_two_sample([1] * 50 + [2] * 50 + [9], [1] * 50 + [2] * 50)
    assert same.pvalue > 0.5 and same.dof == 1
    diff = chi_square_two_sample([1] * 100, [2] * 100)
    assert diff.pvalue < 1e-10
    assert chi_square_two_sample([3] * 10, [3] * 10).pvalue == 1.0
