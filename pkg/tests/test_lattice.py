import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agecp.lattice import (Box, centered_box, cube, edge_axis, edge_key, join,
                           leq, neighbors, pack_box_codes, pack_site, support,
                           unpack_site, validate_config)

sites1 = st.tuples(st.integers(-50, 50))
sites2 = st.tuples(st.integers(-50, 50), st.integers(-50, 50))
configs = st.dictionaries(sites2, st.integers(1, 5), max_size=6)


def test_neighbors_d1():
    assert neighbors((0,)) == [(-1,), (1,)]


def test_neighbors_d2_order_and_count():
    assert neighbors((0, 0)) == [(-1, 0), (1, 0), (0, -1), (0, 1)]
    assert len(neighbors((3, -7))) == 4


def test_neighbors_symmetry():
    x = (2, -1)
    offs = {tuple(a - b for a, b in zip(n, x)) for n in neighbors(x)}
    assert offs == {tuple(-o for o in off) for off in offs}


def test_join_identity_and_max():
    assert join({}, {(0,): 2}) == {(0,): 2}
    assert join({(0,): 2}, {(0,): 3}) == {(0,): 3}
    f = {(1,): 2, (3,): 1}
    assert join(f, f) == f


def test_leq_basics():
    assert leq({}, {(0,): 1})
    assert not leq({(0,): 2}, {(0,): 1})
    assert leq({(0,): 1}, {(0,): 1})


@given(configs, configs)
@settings(max_examples=60, deadline=None)
def test_join_lattice_laws(f, g):
    assert join(f, g) == join(g, f)
    assert join(f, join(f, g)) == join(f, g)
    assert leq(f, join(f, g))
    assert leq(g, join(f, g))


@given(configs, configs, configs)
@settings(max_examples=40, deadline=None)
def test_join_associative(f, g, h):
    assert join(join(f, g), h) == join(f, join(g, h))


@given(configs, configs)
@settings(max_examples=60, deadline=None)
def test_leq_partial_order(f, g):
    if leq(f, g) and leq(g, f):
        assert f == g


@given(st.one_of(sites1, sites2))
@settings(max_examples=80, deadline=None)
def test_pack_roundtrip(x):
    assert unpack_site(pack_site(x), len(x)) == x


def test_pack_is_additive():
    a, b = (3, -2), (5, 9)
    zero = pack_site((0, 0))
    assert pack_site((8, 7)) == pack_site(a) + pack_site(b) - zero


def test_edge_key_canonical():
    assert edge_key((1,), (0,)) == ((0,), (1,))
    assert edge_key((0, 0), (0, 1)) == ((0, 0), (0, 1))
    with pytest.raises(ValueError):
        edge_key((0, 0), (1, 1))
    assert edge_axis((0, 3), (0, 4)) == 1


def test_validate_config_rejects_bad_entries():
    with pytest.raises(ValueError):
        validate_config({(0,): 0}, 1)
    with pytest.raises(ValueError):
        validate_config({(0, 0): 1}, 1)


def test_box_and_cube():
    b = centered_box(2, 1)
    assert b.contains((2,)) and not b.contains((3,))
    assert len(list(b.sites())) == 5
    c = cube((1, 1), 1)
    assert len(list(c.sites())) == 9
    assert c.translate((1, 0)).contains((3, 2))
    with pytest.raises(ValueError):
        Box((1,), (0,))


def test_pack_box_codes_matches_scalar():
    b = centered_box(3, 2)
    assert sorted(pack_box_codes(b).tolist()) == sorted(
        pack_site(x) for x in b.sites())


def test_support():
    assert support({(0,): 1, (2,): 3}) == {(0,), (2,)}
