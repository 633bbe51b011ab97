"""Named laws and configurations used by the examples, the CLI configs and the tests."""
from __future__ import annotations

from fractions import Fraction as F

from .laws import ReproductionLaw, TwoTypeConfig, nearest_neighbor_law, nearest_neighbors


def nn_with(d: int, offspring: dict, nn_mass, extra: dict) -> ReproductionLaw:
    """Nearest-neighbour mass ``nn_mass`` on each of the 2d neighbours plus ``extra`` sites."""
    disp = {e: F(nn_mass) for e in nearest_neighbors(d)}
    for y, w in extra.items():
        disp[y] = disp.get(y, F(0)) + F(w)
    return ReproductionLaw.make(d, offspring, disp)


def red_nn() -> ReproductionLaw:
    return nearest_neighbor_law(2)


def blue_east_jumper() -> ReproductionLaw:
    """E[mu]=3 with half the displacement mass on (2,0); n_b(A_r(e1)) = 3/2 against ``red_nn``."""
    return nn_with(2, {3: 1}, F(1, 8), {(2, 0): F(1, 2)})


def blue_diagonal_jumper() -> ReproductionLaw:
    """E[mu]=3 with mass 1/5 on each (+-2,+-2); n_b = 6/5 along every axis direction."""
    return nn_with(2, {3: 1}, F(1, 20), {(sx, sy): F(1, 5) for sx in (2, -2) for sy in (2, -2)})


def west_jumper() -> ReproductionLaw:
    return nn_with(2, {2: 1}, F(1, 8), {(-2, 0): F(1, 2)})


def east_jumper() -> ReproductionLaw:
    return nn_with(2, {2: 1}, F(1, 8), {(2, 0): F(1, 2)})


def mover(d: int = 2, axis: int = 0) -> ReproductionLaw:
    """Deterministic single child stepping +e_axis (degenerate, fails validation)."""
    e = [0] * d
    e[axis] = 1
    return ReproductionLaw.make(d, {1: 1}, {tuple(e): 1})


def threshold_config(p=0, **kw) -> TwoTypeConfig:
    return TwoTypeConfig(red_nn(), blue_east_jumper(), p=p, **kw)


def symmetric_config(p=1, **kw) -> TwoTypeConfig:
    law = red_nn()
    return TwoTypeConfig(law, law, p=p, **kw)


def blue_stronger_config(**kw) -> TwoTypeConfig:
    return TwoTypeConfig(red_nn(), blue_diagonal_jumper(), p=0, **kw)


def mirror_config(**kw) -> TwoTypeConfig:
    return TwoTypeConfig(west_jumper(), east_jumper(), p=0, **kw)


def coin_walk_1d(**kw) -> TwoTypeConfig:
    """Single red particle, mu = delta_1, nu uniform on {-1, +1}; validation off (mean 1)."""
    law = ReproductionLaw.make(1, {1: 1}, {(1,): F(1, 2), (-1,): F(1, 2)})
    return TwoTypeConfig(law, validate=False, **kw)


def tiny_two_type(p=0, **kw) -> TwoTypeConfig:
    """Small d=1 two-type instance; +-2 sites keep it valid for every p including 1."""
    red = ReproductionLaw.make(1, {1: F(1, 2), 2: F(1, 2)}, {(1,): F(1, 2), (-1,): F(1, 4), (2,): F(1, 8), (-2,): F(1, 8)})
    blue = ReproductionLaw.make(1, {1: F(1, 2), 2: F(1, 2)}, {(1,): F(1, 4), (-1,): F(1, 2), (2,): F(1, 8), (-2,): F(1, 8)})
    return TwoTypeConfig(red, blue, p=p, **kw)


def nn_line(p=0, **kw) -> TwoTypeConfig:
    """d=1, both types mu uniform{1,2}, nu uniform{-1,+1}; small enough to enumerate at horizon 2.

    Validation is skipped so p=1 is allowed despite K having no +-2 sites.
    """
    law = ReproductionLaw.make(1, {1: F(1, 2), 2: F(1, 2)}, {(1,): F(1, 2), (-1,): F(1, 2)})
    return TwoTypeConfig(law, law, p=p, validate=False, **kw)
