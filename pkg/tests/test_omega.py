import math

import numpy as np
import pytest

from agecp.lattice import centered_box
from agecp.omega import (AgeProfile, ArrowEvent, HorizonExceededError,
                         ModelParams, Omega, constant_profile, derive_seed,
                         thin)


def mk_params(d=1, head=(0.0, 3.0), tail=3.0, gamma=1.0, **kw):
    return ModelParams(dimension=d, profile=AgeProfile(head=head, tail=tail),
                       gamma=gamma, **kw)


@pytest.fixture
def om():
    return Omega(seed=42, params=mk_params(), horizon=60.0)


def test_profile_invariants():
    with pytest.raises(ValueError):
        AgeProfile(head=(2.0, 1.0), tail=3.0)     # decreasing head
    with pytest.raises(ValueError):
        AgeProfile(head=(1.0,), tail=0.5)         # tail below head
    p = AgeProfile(head=(0.0, 2.0), tail=4.0)
    assert p.rate(0) == 0.0 and p.rate(1) == 0.0
    assert p.rate(2) == 2.0 and p.rate(3) == 4.0 and p.rate(99) == 4.0


def test_params_invariants():
    with pytest.raises(ValueError):
        mk_params(gamma=0.0)
    with pytest.raises(ValueError):
        mk_params(base_rate=1.0)  # below the tail
    with pytest.raises(ValueError):
        mk_params(gamma_base=0.5)  # below gamma
    p = mk_params()
    assert p.base_rate == 3.0 and p.gamma_base == 1.0


def test_determinism_and_prefix(om):
    a = om.death_times((0,), (0.0, 10.0))
    b = om.death_times((0,), (0.0, 10.0))
    assert np.array_equal(a, b)
    pref = om.death_times((0,), (0.0, 4.0))
    assert np.array_equal(a[:len(pref)], pref)
    # a second omega with the same seed agrees exactly
    om2 = Omega(seed=42, params=mk_params(), horizon=60.0)
    assert np.array_equal(om2.death_times((0,), (0.0, 10.0)), a)


def test_zero_length_window(om):
    assert len(om.death_times((0,), (3.0, 3.0))) == 0
    assert len(om.maturation_times((1,), (5.0, 5.0))) == 0


def test_sorted_strictly(om):
    t = om.death_times((2,), (0.0, 60.0))
    assert (np.diff(t) > 0).all()
    ar = om.arrow_events(((0,), (1,)), (0.0, 60.0))
    assert all(x.time < y.time for x, y in zip(ar, ar[1:]))
    assert all(0.0 <= e.mark <= 1.0 for e in ar)


def test_poisson_means():
    p = ModelParams(dimension=1, profile=constant_profile(4.0), gamma=0.5)
    om = Omega(seed=7, params=p, horizon=20.0)
    deaths = [len(om.death_times((i,), (0.0, 10.0))) for i in range(1500)]
    m = np.mean(deaths)
    assert abs(m - 10.0) < 3 * math.sqrt(10.0 / 1500)
    mats = [len(om.maturation_times((i,), (0.0, 20.0))) for i in range(1500)]
    assert abs(np.mean(mats) - 10.0) < 3 * math.sqrt(10.0 / 1500)
    arrows = [len(om.arrow_events(((i,), (i + 1,)), (0.0, 5.0)))
              for i in range(1500)]
    assert abs(np.mean(arrows) - 20.0) < 3 * math.sqrt(20.0 / 1500)
    marks = [e.mark for i in range(300)
             for e in om.arrow_events(((i,), (i + 1,)), (0.0, 10.0))]
    assert abs(np.mean(marks) - 0.5) < 3 * math.sqrt(1 / 12 / len(marks))


def test_horizon_errors(om):
    with pytest.raises(HorizonExceededError):
        om.death_times((0,), (0.0, 61.0))
    with pytest.raises(HorizonExceededError):
        om.shift_time(10.0).death_times((0,), (0.0, 55.0))


def test_edge_orientation_identity(om):
    a = om.arrow_events(((0,), (1,)), (0.0, 20.0))
    b = om.arrow_events(((1,), (0,)), (0.0, 20.0))
    assert a == b


def test_shift_time_definition_and_composition(om):
    v = om.shift_time(3.0)
    a = v.death_times((0,), (0.0, 2.0))
    b = om.death_times((0,), (3.0, 5.0)) - 3.0
    assert np.allclose(a, b) and len(a) == len(b)
    v0 = om.shift_time(0.0)
    assert np.array_equal(v0.death_times((0,), (0.0, 5.0)),
                          om.death_times((0,), (0.0, 5.0)))
    comp = om.shift_time(1.0).shift_time(2.0)
    assert np.array_equal(comp.death_times((0,), (0.0, 2.0)), a)


def test_shift_space_group_action(om):
    v = om.shift_space((4,))
    assert np.array_equal(v.death_times((1,), (0.0, 9.0)),
                          om.death_times((5,), (0.0, 9.0)))
    back = v.shift_space((-4,))
    assert np.array_equal(back.death_times((1,), (0.0, 9.0)),
                          om.death_times((1,), (0.0, 9.0)))
    v0 = om.shift_space((0,))
    assert np.array_equal(v0.maturation_times((2,), (0.0, 9.0)),
                          om.maturation_times((2,), (0.0, 9.0)))


def test_maturation_thinning_coupling():
    # gamma' > gamma sharing the base process: maturations are nested
    base = dict(d=1, head=(0.0, 3.0), tail=3.0)
    lo = Omega(seed=9, params=mk_params(gamma=0.5, gamma_base=2.0, **base),
               horizon=30.0)
    hi = Omega(seed=9, params=mk_params(gamma=2.0, gamma_base=2.0, **base),
               horizon=30.0)
    for x in [(0,), (3,), (-7,)]:
        a = set(lo.maturation_times(x, (0.0, 30.0)).tolist())
        b = set(hi.maturation_times(x, (0.0, 30.0)).tolist())
        assert a <= b


def test_arrow_cross_profile_coupling():
    # componentwise smaller profile, same base rate and seed: thinned subsets
    lo_p = ModelParams(dimension=1, profile=AgeProfile((0.0, 1.0), 2.0),
                       gamma=1.0, base_rate=4.0)
    hi_p = ModelParams(dimension=1, profile=AgeProfile((0.5, 2.0), 4.0),
                       gamma=1.0, base_rate=4.0)
    lo = Omega(seed=11, params=lo_p, horizon=20.0)
    hi = Omega(seed=11, params=hi_p, horizon=20.0)
    ev_lo = lo.arrow_events(((0,), (1,)), (0.0, 20.0))
    ev_hi = hi.arrow_events(((0,), (1,)), (0.0, 20.0))
    assert ev_lo == ev_hi  # same base stream
    for age in (0, 1, 2, 3):
        a = set(thin(ev_lo, age, lo_p.profile, 4.0))
        b = set(thin(ev_hi, age, hi_p.profile, 4.0))
        assert a <= b


def test_thin_spec_example():
    prof = AgeProfile((2.0,), 4.0)
    evs = [ArrowEvent(1.0, 0.3), ArrowEvent(2.0, 0.6), ArrowEvent(3.0, 0.9)]
    assert thin(evs, 0, prof, 4.0) == []
    assert thin(evs, 1, prof, 4.0) == [1.0]
    assert thin(evs, 2, prof, 4.0) == [1.0, 2.0, 3.0]


def test_thin_monotone_in_age(om):
    evs = om.arrow_events(((0,), (1,)), (0.0, 30.0))
    prof = AgeProfile((0.5, 1.5, 2.5), 3.0)
    prev: list[float] = []
    for age in range(0, 6):
        cur = thin(evs, age, prof, 3.0)
        assert set(prev) <= set(cur)
        prev = cur


def test_pregenerate_matches_lazy():
    p = mk_params(d=2, head=(0.0, 1.5), tail=1.5, gamma=2.0)
    lazy = Omega(seed=77, params=p, horizon=25.0)
    eager = Omega(seed=77, params=p, horizon=25.0)
    eager.pregenerate(centered_box(6, 2), 25.0)
    for x in [(0, 0), (3, -2), (-6, 6), (6, 6)]:
        assert np.array_equal(lazy.death_times(x, (0.0, 25.0)),
                              eager.death_times(x, (0.0, 25.0)))
        assert np.array_equal(lazy.maturation_times(x, (0.0, 25.0)),
                              eager.maturation_times(x, (0.0, 25.0)))
    for e in [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((-7, 0), (-6, 0))]:
        assert lazy.arrow_events(e, (0.0, 25.0)) == eager.arrow_events(e, (0.0, 25.0))


def test_derive_seed_spreads():
    seeds = {derive_seed(123, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(123, 1) != derive_seed(124, 1)
