import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from whardy.dyadic import (
    CubeIndex,
    DyadicLattice,
    LevelError,
    assign_to_maximal,
    cubes_at_level,
    dilated_cube,
    locate,
    maximal_antichain,
    overlap_fraction,
)
from whardy.grid import Grid


def test_level_zero_is_whole_torus():
    lat = DyadicLattice(Grid(1, 64))
    (Q,) = cubes_at_level(lat, 0)
    assert Q == CubeIndex(0, (0,)) and Q.indicator(lat.grid).all()


def test_two_dimensional_level_two_tiles():
    lat = DyadicLattice(Grid(2, 32))
    cubes = cubes_at_level(lat, 2)
    assert len(cubes) == 16
    cover = sum(Q.indicator(lat.grid).astype(int) for Q in cubes)
    assert np.all(cover == 1)
    assert cubes == sorted(cubes, key=lambda Q: Q.l)


def test_level_three_corners():
    lat = DyadicLattice(Grid(1, 64))
    assert [Q.corner()[0] for Q in cubes_at_level(lat, 3)] == [k / 8 for k in range(8)]


def test_level_beyond_lattice_raises():
    lat = DyadicLattice(Grid(1, 64), max_level=4)
    with pytest.raises(LevelError):
        cubes_at_level(lat, 5)


def test_locate_examples(rng):
    lat = DyadicLattice(Grid(1, 64))
    assert locate(lat, 0.0, 3) == CubeIndex(3, (0,))
    assert locate(lat, 3 / 8, 3) == CubeIndex(3, (3,))
    for x in rng.random(50):
        scan = [Q for Q in cubes_at_level(lat, 4) if Q.corner()[0] <= x < Q.corner()[0] + Q.side()]
        assert scan == [locate(lat, x, 4)]


def test_maximal_antichain_examples(rng):
    Q = CubeIndex(2, (1,))
    assert maximal_antichain({Q}) == {Q}
    assert maximal_antichain({Q, Q.children()[1]}) == {Q}
    cubes = set()
    while len(cubes) < 50:
        j = int(rng.integers(0, 6))
        cubes.add(CubeIndex(j, tuple(int(v) for v in rng.integers(0, 2**j, 2))))
    oracle = {A for A in cubes if not any(B != A and B.contains(A) for B in cubes)}
    out = maximal_antichain(cubes)
    assert out == oracle
    groups = assign_to_maximal(cubes, out)
    assert sorted(itertools.chain(*groups.values())) == sorted(cubes)
    for top, members in groups.items():
        assert all(top.contains(M) for M in members)


def test_overlap_fraction_examples():
    g = Grid(1, 64)
    lat = DyadicLattice(g)
    Q = CubeIndex(2, (1,))
    assert overlap_fraction(lat, Q, np.ones(64, bool)) == 1
    assert overlap_fraction(lat, Q, np.zeros(64, bool)) == 0
    E = np.zeros(64, bool)
    E[16:24] = True
    assert abs(overlap_fraction(lat, Q, E) - 0.5) <= 1 / 16


def test_dilated_cube():
    g = Grid(1, 64)
    Q = CubeIndex(3, (2,))
    mask, measure = dilated_cube(g, Q, 3)
    assert measure == pytest.approx(3 / 8)
    assert mask.sum() == 24 and mask[Q.slices(g)].all()
    mask, measure = dilated_cube(g, Q, 16)
    assert mask.all() and measure == 1.0


@given(st.integers(1, 2), st.integers(0, 5))
def test_partition_and_nesting(n, j):
    g = Grid(n, 32 if n == 1 else 16)
    lat = DyadicLattice(g)
    j = min(j, lat.max_level - 1)
    cover = sum(Q.indicator(g).astype(int) for Q in cubes_at_level(lat, j))
    assert np.all(cover == 1)
    for C in cubes_at_level(lat, j + 1):
        parents = [P for P in cubes_at_level(lat, j) if P.contains(C)]
        assert parents == [C.parent()]


cube_st = st.integers(0, 6).flatmap(
    lambda j: st.tuples(st.just(j), st.integers(0, 2**j - 1), st.integers(0, 2**j - 1))
)


@given(st.lists(cube_st, min_size=1, max_size=40))
def test_maximal_antichain_is_antichain(raw):
    cubes = {CubeIndex(j, (a, b)) for j, a, b in raw}
    out = maximal_antichain(cubes)
    for A in out:
        assert not any(B != A and B.contains(A) for B in out)
    for C in cubes:
        assert sum(A.contains(C) for A in out) == 1


def test_cube_json_round_trip():
    Q = CubeIndex(4, (3, 9))
    assert CubeIndex.from_dict(Q.to_dict()) == Q
    assert Q.to_dict() == {"j": 4, "l": [3, 9]}
