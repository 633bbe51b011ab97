from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from brwcompete import laws
from brwcompete.laws import (
    ConfigError,
    CountMode,
    InitialCell,
    LawError,
    ReproductionLaw,
    TwoTypeConfig,
    min_coupling_law,
    nearest_neighbor_law,
    offspring_mean,
    pgf_eval,
    validate_law,
)

NN2 = {e: F(1, 4) for e in laws.nearest_neighbors(2)}


def law(off, disp=None, d=2):
    return ReproductionLaw.make(d, off, disp or NN2)


def test_nearest_neighbor_delta2_is_valid():
    rep = validate_law(nearest_neighbor_law(2), 2, 0)
    assert rep.ok and rep.violations == [] and rep.warnings == []


@pytest.mark.parametrize("bad, code", [
    (ReproductionLaw(2, ((0, F(1, 2)), (2, F(1, 2))), tuple(sorted(NN2.items()))), laws.OFFSPRING_ZERO),
    (ReproductionLaw(2, ((1, F(1)),), tuple(sorted(NN2.items()))), laws.OFFSPRING_MEAN),
    (ReproductionLaw(2, ((2, F(1, 2)),), tuple(sorted(NN2.items()))), laws.PMF_SUM),
    (ReproductionLaw(2, ((2, F(1)), (3, F(0))), tuple(sorted(NN2.items()))), laws.PMF_NONPOSITIVE),
    (ReproductionLaw(2, ((2, F(1)),), ()), laws.DISPLACEMENT_EMPTY),
    (ReproductionLaw(2, ((2, F(1)),), (((1, 0), F(1, 2)), ((0, 1), F(1, 2)))), laws.MISSING_NEIGHBOR),
    (ReproductionLaw(2, ((2, F(1)),), tuple(sorted({**{e: F(1, 5) for e in NN2}, (1, 0, 0): F(1, 5)}.items()))),
     laws.DISPLACEMENT_DIMENSION),
])
def test_each_violation_code(bad, code):
    assert code in validate_law(bad).codes


def test_dimension_mismatch():
    assert laws.DIMENSION_MISMATCH in validate_law(nearest_neighbor_law(2), d=3).codes


def test_mass_on_zero_reports_code():
    bad = law({0: F(1, 2), 3: F(1, 2)})
    assert "offspring_support_includes_0" in validate_law(bad).codes


def test_d1_extension_error_and_warning():
    k = law({2: 1}, {(1,): F(1, 2), (-1,): F(1, 2)}, d=1)
    assert laws.D1_EXTENSION in validate_law(k, 1, 1).codes
    mid = validate_law(k, 1, F(1, 2))
    assert mid.ok and [w.code for w in mid.warnings] == [laws.D1_EXTENSION]
    assert validate_law(k, 1, 0).ok and not validate_law(k, 1, 0).warnings
    ext = law({2: 1}, {(1,): F(1, 4), (-1,): F(1, 4), (2,): F(1, 4), (-2,): F(1, 4)}, d=1)
    assert validate_law(ext, 1, 1).ok


def test_require_valid_raises_with_codes():
    with pytest.raises(LawError) as exc:
        laws.require_valid(law({1: 1}))
    assert laws.OFFSPRING_MEAN in exc.value.report.codes


@pytest.mark.parametrize("off, mean", [({2: 1}, 2), ({1: F(1, 2), 3: F(1, 2)}, 2),
                                       ({1: F(1, 4), 2: F(1, 4), 5: F(1, 2)}, F(13, 4))])
def test_offspring_mean(off, mean):
    assert offspring_mean(law(off)) == mean


def test_min_coupling_examples():
    assert min_coupling_law(law({2: 1}), law({2: 1})).offspring == {2: 1}
    assert min_coupling_law(law({1: 1}), law({2: F(1, 3), 7: F(2, 3)})).offspring == {1: 1}
    got = min_coupling_law(law({1: F(1, 2), 2: F(1, 2)}), law({1: F(1, 2), 3: F(1, 2)}))
    assert got.offspring == {1: F(3, 4), 2: F(1, 4)}


def test_min_coupling_displacement_mismatch():
    other = law({2: 1}, {**NN2, (1, 0): F(1, 8), (2, 0): F(1, 8)})
    with pytest.raises(ValueError, match="coupling requires identical displacement law"):
        min_coupling_law(nearest_neighbor_law(2), other)


pmfs = st.dictionaries(st.integers(1, 6), st.integers(1, 9), min_size=1, max_size=4).map(
    lambda d: {k: F(v, sum(d.values())) for k, v in d.items()})


@settings(max_examples=200, deadline=None)
@given(pmfs, pmfs)
def test_min_coupling_properties(a, b):
    m = min_coupling_law(law(a), law(b))
    assert sum(m.offspring.values()) == 1
    assert offspring_mean(m) <= min(offspring_mean(law(a)), offspring_mean(law(b)))
    # brute-force oracle over the product space
    brute = {}
    for x, wx in a.items():
        for y, wy in b.items():
            brute[min(x, y)] = brute.get(min(x, y), 0) + wx * wy
    assert m.offspring == brute


def test_pgf_examples():
    assert pgf_eval({2: F(1, 3), 5: F(2, 3)}, 1) == 1
    assert pgf_eval({2: 1}, 0.5) == 0.25
    assert pgf_eval({1: F(3, 8), 2: F(9, 16), 0: F(1, 16)}, F(1, 2)) == F(25, 64)
    assert pgf_eval({1: 0.375, 2: 0.5625, 0: 0.0625}, 0.5) == pytest.approx(0.390625, abs=0)
    with pytest.raises(ValueError):
        pgf_eval({2: 1}, F(3, 2))


@settings(max_examples=100, deadline=None)
@given(pmfs, st.fractions(0, 1, max_denominator=20), st.fractions(0, 1, max_denominator=20))
def test_pgf_monotone_convex(pmf, s, t):
    lo, hi = min(s, t), max(s, t)
    assert pgf_eval(pmf, 0) == 0
    assert pgf_eval(pmf, lo) <= pgf_eval(pmf, hi)
    mid = (lo + hi) / 2
    assert pgf_eval(pmf, mid) <= (pgf_eval(pmf, lo) + pgf_eval(pmf, hi)) / 2


def test_default_initial_condition():
    cfg = TwoTypeConfig(nearest_neighbor_law(2), nearest_neighbor_law(2))
    assert cfg.initial_cells() == (InitialCell((0, 0), "red", 1), InitialCell((1, 0), "blue", 1))
    single = TwoTypeConfig(nearest_neighbor_law(3))
    assert single.initial_cells() == (InitialCell((0, 0, 0), "red", 1),)


def test_config_rejects_bad_inputs():
    nn = nearest_neighbor_law(2)
    with pytest.raises(ConfigError):
        TwoTypeConfig(nn, nn, p=F(3, 2))
    with pytest.raises(ConfigError):
        TwoTypeConfig(nn, nn, tie_break="dice")
    with pytest.raises(ConfigError):
        TwoTypeConfig(nn, nearest_neighbor_law(3))
    with pytest.raises(LawError):
        TwoTypeConfig(law({1: 1}))
    with pytest.raises(LawError):
        ext = law({2: 1}, {(1,): F(1, 2), (-1,): F(1, 2)}, d=1)
        TwoTypeConfig(ext, ext, p=1)


def test_count_mode_parse():
    assert CountMode.parse("exact") == CountMode()
    capped = CountMode.parse("capped:1000")
    assert capped.kind == "capped" and capped.cap == 1000 and str(capped) == "capped:1000"
    with pytest.raises(ConfigError):
        CountMode.parse("loose")
