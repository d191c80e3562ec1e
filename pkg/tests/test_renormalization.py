import math

import pytest

from agecp.engine import evolve, krone_params
from agecp.lattice import cube
from agecp.omega import (AgeProfile, ModelParams, Omega, constant_profile,
                         derive_seed)
from agecp.renormalization import (BlockGeometry, MacroField, build_macro_field,
                                   check_block_B1, estimate_B1,
                                   estimate_block_success, explore_macro_edge,
                                   find_cube_delivery, good_site_bound,
                                   good_site_indicator, oriented_percolation,
                                   run_restart)

STRONG = ModelParams(dimension=1, profile=AgeProfile((0.0, 6.0), 6.0), gamma=4.0)


def test_geometry_validation():
    with pytest.raises(ValueError):
        BlockGeometry(2, 2, 1)   # n < a required
    with pytest.raises(ValueError):
        BlockGeometry(0, 2, 1)
    g = BlockGeometry(1, 2, 3)
    assert g.level_height == 90.0


def test_good_site_bound_value_and_monotonicity():
    v = good_site_bound(0.1, 1, 100.0, 100.0, 1)
    expect = math.exp(-0.15) * (1 - math.exp(-5.0)) * (1 - math.exp(-5.0)) ** 2
    assert v == pytest.approx(expect)
    assert v == pytest.approx(0.8434, abs=5e-4)
    # nondecreasing in gamma and lambda_next
    assert good_site_bound(0.1, 1, 200.0, 100.0, 1) >= v
    assert good_site_bound(0.1, 1, 100.0, 200.0, 1) >= v
    # gamma -> 0 kills the bound
    assert good_site_bound(0.1, 1, 1e-9, 100.0, 1) < 1e-6


def test_good_site_indicator_mc_vs_bound():
    p = ModelParams(dimension=1, profile=AgeProfile((0.0, 100.0), 100.0),
                    gamma=100.0, base_rate=100.0)
    bound = good_site_bound(0.1, 1, 100.0, 100.0, 1)
    hits = 0
    n = 600
    for i in range(n):
        om = Omega(seed=derive_seed(42, i), params=p, horizon=1.0)
        hits += good_site_indicator(om, (0,), 0.0, 0.1, 1)
    freq = hits / n
    se = math.sqrt(max(freq * (1 - freq), 1e-6) / n)
    assert freq >= bound - 3 * se


def test_good_site_indicator_m_zero_vacuous():
    p = ModelParams(dimension=1, profile=constant_profile(5.0), gamma=1e-6,
                    gamma_base=1e-6)
    # with m=0 the maturation requirement disappears
    hits = 0
    for i in range(200):
        om = Omega(seed=derive_seed(43, i), params=p, horizon=2.0)
        hits += good_site_indicator(om, (0,), 0.0, 0.5, 0)
    assert hits > 0


def test_find_cube_delivery_initial_state():
    om = Omega(seed=1, params=STRONG, horizon=10.0)
    init = {x: 1 for x in cube((3,), 1).sites()}
    traj = evolve(om, init, 1.0)
    from agecp.lattice import Box
    hit = find_cube_delivery(traj, Box((2,), (4,)), 0.0, 0.5, 1)
    assert hit is not None
    y, t = hit
    assert t == 0.0 and y == (3,)   # lexicographically smallest full cube


def test_b1_zero_profile_false():
    p = ModelParams(dimension=1, profile=constant_profile(0.0), gamma=1.0)
    om = Omega(seed=2, params=p, horizon=10.0)
    assert not check_block_B1(om, BlockGeometry(1, 3, 1))


def test_b1_start_window_validation():
    om = Omega(seed=3, params=STRONG, horizon=10.0)
    with pytest.raises(ValueError):
        check_block_B1(om, BlockGeometry(1, 3, 1), x=(9,), s=0.0)


def test_estimate_b1_zero_and_interval():
    p = ModelParams(dimension=1, profile=constant_profile(0.0), gamma=1.0)
    est = estimate_B1(p, BlockGeometry(1, 2, 1), 40, seed=5)
    assert est.p_hat == 0.0
    lo, hi = est.interval
    assert lo == 0.0 and hi < 0.15


def test_estimate_b1_strong_profile_high():
    est = estimate_B1(STRONG, BlockGeometry(1, 2, 1), 60, seed=6)
    assert est.p_hat > 0.75


def test_b1_monotone_in_profile_shared_seeds():
    # larger profile, same seeds: the indicator never flips true -> false
    lo_p = ModelParams(dimension=1, profile=AgeProfile((0.0, 2.5), 2.5),
                       gamma=2.0, base_rate=4.0)
    hi_p = ModelParams(dimension=1, profile=AgeProfile((0.0, 4.0), 4.0),
                       gamma=2.0, base_rate=4.0)
    g = BlockGeometry(1, 2, 1)
    for i in range(40):
        s = derive_seed(77, i)
        lo = check_block_B1(Omega(seed=s, params=lo_p, horizon=8.0), g)
        hi = check_block_B1(Omega(seed=s, params=hi_p, horizon=8.0), g)
        assert hi or not lo


def test_explore_macro_edge_and_field():
    g = BlockGeometry(1, 2, 1)
    om = Omega(seed=11, params=STRONG, horizon=200.0)
    hit = explore_macro_edge(om, g, ((0,), 0.0), 0, 0, +1)
    if hit is not None:
        y, t = hit
        assert 30.0 <= t <= 31.0
        assert 2 * 6 * 1 * g.a - g.a <= y[0] <= 2 * 6 * 1 * g.a + g.a


def test_macro_field_anchor_soundness():
    """Non-dagger anchors correspond to cubes alive in the ambient process."""
    g = BlockGeometry(1, 2, 1)
    k_levels = 3
    om = Omega(seed=13, params=STRONG, horizon=g.level_height * k_levels + 4)
    fld = build_macro_field(om, g, k_levels, epsilon_pad=0.05, pad_seed=13)
    from agecp.engine import StaticRegion
    from agecp.lattice import centered_box
    init = {x: 1 for x in cube((0,), g.n).sites()}
    region = StaticRegion(centered_box(2000, 1))
    ambient = evolve(om, init, g.level_height * k_levels + 2, region=region)
    for (j, k), anc in fld.anchors.items():
        if anc is None or k == 0:
            continue
        site, t_anc = anc
        conf = ambient.config_at(t_anc)
        assert all(s in conf for s in cube(site, g.n).sites()), (j, k)
    # open-path coupling: reachable level k implies ambient alive at 30bk
    reach = fld.cluster()
    for k, sites in enumerate(reach):
        if sites:
            assert ambient.config_at(g.level_height * k), f"empty at level {k}"


def test_macro_field_bernoulli_padding():
    # dead process: every level-2 bit is a bernoulli pad (all anchors dagger)
    p = ModelParams(dimension=1, profile=constant_profile(0.0), gamma=1.0)
    g = BlockGeometry(1, 2, 1)
    om = Omega(seed=17, params=p, horizon=100.0)
    fld = build_macro_field(om, g, 2, epsilon_pad=0.25, pad_seed=17)
    lvl2 = [v for k, v in fld.bits.items() if k[0] == 2]
    assert lvl2
    assert all(src == "bernoulli" for _bit, src in lvl2)


def test_restart_strong_profile_certifies():
    g = BlockGeometry(1, 2, 1)
    om = Omega(seed=19, params=STRONG, horizon=400.0)
    out = run_restart(om, {(0,): 1}, g, 60.0, k_levels=4, epsilon_pad=0.05)
    if out.y is not None:
        assert not out.censored
        assert out.sigma_restart <= 60.0 + g.level_height * 5
    else:
        assert out.censored or out.lifetime is not None


def test_restart_extinct_run():
    p = ModelParams(dimension=1, profile=constant_profile(0.0), gamma=1.0)
    om = Omega(seed=23, params=p, horizon=100.0)
    out = run_restart(om, {(0,): 1}, BlockGeometry(1, 2, 1), 50.0,
                      k_levels=3, epsilon_pad=0.5)
    assert out.y is None
    assert out.lifetime is not None
    assert out.sigma_restart > out.lifetime


def test_oriented_percolation_degenerate():
    r0 = oriented_percolation(0.0, 10, seed=1)
    assert r0.tau == 1 and not r0.survived
    r1 = oriented_percolation(1.0, 10, seed=1)
    assert r1.survived and r1.eta_sizes[-1] == 11
    assert r1.hit_counts[0] >= 5


def test_oriented_percolation_monotone_in_p():
    # shared seed: higher p must survive at least as often
    surv = {}
    for p in (0.55, 0.75, 0.95):
        cnt = 0
        for i in range(150):
            cnt += oriented_percolation(p, 25, seed=derive_seed(3, i)).survived
        surv[p] = cnt
    assert surv[0.55] <= surv[0.75] <= surv[0.95]
    assert surv[0.95] > 0


def test_oriented_percolation_one_dependent():
    cnt = 0
    for i in range(100):
        r = oriented_percolation(0.9, 20, dependence="one-dependent",
                                 seed=derive_seed(5, i))
        cnt += r.survived
    assert cnt > 10
