import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from whardy.analysis import (
    centred_maximal,
    discrete_square_function,
    energy_table,
    energy_table_csv,
    fractional_maximal,
    grand_maximal,
    grand_maximal_majorant,
    hl_maximal,
    local_hardy_norm,
    lp_square_function,
    oscillation_square_function,
)
from whardy.dyadic import CubeIndex, DyadicLattice, LevelError
from whardy.filters import build_filter_bank
from whardy.grid import Grid, SampledFunction, lp_norm
from whardy.weights import constant_weight, power_weight


@pytest.fixture(scope="module")
def setup256():
    g = Grid(1, 256)
    return g, build_filter_bank(g), DyadicLattice(g)


def brute_dyadic_maximal(v, alpha=0.0):
    n = len(v)
    out = np.zeros(n)
    for k in range(n):
        level = 0
        while (n >> level) >= 1:
            s = n >> level
            a = (k // s) * s
            out[k] = max(out[k], (s / n) ** alpha * np.abs(v[a : a + s]).mean())
            level += 1
    return out


def test_square_functions_of_zero(setup256):
    g, bank, lat = setup256
    z = SampledFunction.zeros(g)
    assert lp_square_function(z, bank).values.values.max() == 0
    assert discrete_square_function(z, bank, lat, 2).values.values.max() == 0
    osc = oscillation_square_function(z, bank, lat, 2)
    assert osc.s0.values.values.max() == 0 and osc.s1.values.values.max() == 0
    assert local_hardy_norm(z, 1, constant_weight(g), bank, lat, 2) == 0


def test_square_function_is_isometric(setup256, rng):
    g, bank, _ = setup256
    f = SampledFunction(g, rng.standard_normal(256))
    assert lp_norm(lp_square_function(f, bank).values, 2) == pytest.approx(lp_norm(f, 2), rel=1e-10)


def test_single_mode_inside_one_annulus_scales_by_window():
    g = Grid(1, 256)
    bank = build_filter_bank(g)
    for k0 in range(1, 128):
        active = [j for j in bank.scales if bank.windows[j][k0] > 0]
        if len(active) == 1:
            break
    (j,) = active
    f = SampledFunction(g, np.sin(2 * np.pi * k0 * g.axis()))
    gf = lp_square_function(f, bank).values.values
    assert np.allclose(gf, bank.windows[j][k0] * np.abs(f.values), atol=1e-10)


def test_constant_function_only_lowpass(setup256):
    g, bank, lat = setup256
    f = SampledFunction.constant(g, 2.5)
    gd = discrete_square_function(f, bank, lat, 2).values.values
    gf = lp_square_function(f, bank).values.values
    assert np.allclose(gd, 2.5 * bank.windows[0][0], atol=1e-10)
    assert np.allclose(gf, gd, atol=1e-10)


def test_discrete_square_function_comparable(setup256, rng):
    g, bank, lat = setup256
    w = constant_weight(g)
    for N in (2, 3, 4):
        f = SampledFunction(g, rng.standard_normal(256))
        r = discrete_square_function(f, bank, lat, N).norm(2, w) / lp_square_function(f, bank).norm(2, w)
        assert 0.5 <= r <= 2
        assert 0.5 <= local_hardy_norm(f, 2, w, bank, lat, N) / lp_norm(f, 2) <= 2


def test_level_overflow(setup256):
    g, bank, _ = setup256
    lat = DyadicLattice(g, max_level=5)
    with pytest.raises(LevelError):
        discrete_square_function(SampledFunction.zeros(g), bank, lat, 2)


def test_sup_corner_inf_ordering(setup256, rng):
    g, bank, lat = setup256
    f = SampledFunction(g, rng.standard_normal(256))
    N = 2
    sup = oscillation_square_function(f, bank, lat, N, "sup").combined().values.values
    inf = oscillation_square_function(f, bank, lat, N, "inf").combined().values.values
    # the corner variant uses level N for the low-pass, as S0 does
    layers = bank.filter_all(f)
    acc = np.zeros(256)
    for j in bank.scales:
        s = 256 >> (j + N) if j else 256 >> N
        acc += np.repeat(np.abs(layers[j][::s]), s) ** 2
    corner = np.sqrt(acc)
    assert np.all(sup >= corner - 1e-12) and np.all(corner >= inf - 1e-12)


def test_oscillation_matches_cube_scan(setup256, rng):
    g, bank, lat = setup256
    f = SampledFunction(g, rng.standard_normal(256))
    N = 1
    osc = oscillation_square_function(f, bank, lat, N, "sup")
    layers = np.abs(bank.filter_all(f))
    s0 = np.zeros(256)
    acc = np.zeros(256)
    for j in bank.scales:
        s = 256 >> (j + N)
        for a in range(0, 256, s):
            m = layers[j][a : a + s].max()
            if j == 0:
                s0[a : a + s] = m
            else:
                acc[a : a + s] += m**2
    assert np.allclose(osc.s0.values.values, s0, atol=1e-12)
    assert np.allclose(osc.s1.values.values, np.sqrt(acc), atol=1e-12)


def test_hl_maximal_examples():
    g = Grid(1, 64)
    lat = DyadicLattice(g)
    assert np.allclose(hl_maximal(SampledFunction.constant(g, 1.0), lat).values, 1)
    Q = CubeIndex(3, (2,))
    chi = SampledFunction(g, Q.indicator(g).astype(float))
    mf = hl_maximal(chi, lat).values
    assert np.allclose(mf[Q.slices(g)], 1)
    for level in range(3):
        A = Q.ancestor(level)
        outside = A.indicator(g) & ~Q.ancestor(level + 1).indicator(g)
        assert np.allclose(mf[outside], Q.measure() / A.measure())


def test_hl_maximal_matches_brute_force(rng):
    g = Grid(1, 64)
    v = rng.standard_normal(64)
    out = hl_maximal(SampledFunction(g, v), DyadicLattice(g)).values
    assert np.max(np.abs(out - brute_dyadic_maximal(v))) < 1e-10
    assert np.all(out >= np.abs(v) - 1e-12)


def test_fractional_maximal_examples(rng):
    g = Grid(1, 64)
    lat = DyadicLattice(g)
    v = rng.standard_normal(64)
    f = SampledFunction(g, v)
    assert np.allclose(fractional_maximal(f, 0.0, lat).values, hl_maximal(f, lat).values, atol=1e-14)
    out = fractional_maximal(f, 0.4, lat).values
    assert np.max(np.abs(out - brute_dyadic_maximal(v, 0.4))) < 1e-10
    Q = CubeIndex(2, (1,))
    chi = SampledFunction(g, Q.indicator(g).astype(float))
    assert np.all(fractional_maximal(chi, 0.4, lat).values[Q.slices(g)] >= Q.measure() ** 0.4 - 1e-12)
    with pytest.raises(ValueError):
        fractional_maximal(f, 1.0, lat)


def test_fractional_maximal_two_dimensional(rng):
    g = Grid(2, 16)
    lat = DyadicLattice(g)
    v = rng.standard_normal((16, 16))
    out = fractional_maximal(SampledFunction(g, v), 0.5, lat).values
    ref = np.zeros((16, 16))
    for level in range(5):
        s = 16 >> level
        for a in range(0, 16, s):
            for b in range(0, 16, s):
                m = (s * s / 256) ** 0.25 * np.abs(v[a : a + s, b : b + s]).mean()
                ref[a : a + s, b : b + s] = np.maximum(ref[a : a + s, b : b + s], m)
    assert np.max(np.abs(out - ref)) < 1e-10


def test_grand_maximal_examples(setup256, rng):
    g, bank, _ = setup256
    assert np.allclose(grand_maximal(SampledFunction.constant(g, 3.0), bank=bank).values, 3.0, atol=1e-10)
    assert grand_maximal(SampledFunction.zeros(g), bank=bank).values.max() == 0
    f = SampledFunction(g, rng.standard_normal(256))
    C = grand_maximal_majorant(bank.psi0, bank.j_max)
    assert np.isfinite(C)
    assert np.all(grand_maximal(f, bank=bank).values <= C * centred_maximal(f).values + 1e-12)
    with pytest.raises(ValueError):
        grand_maximal(f, profile=bank.psi(2))


def test_energy_table(setup256, rng):
    g, bank, _ = setup256
    f = SampledFunction(g, rng.standard_normal(256))
    rows = energy_table(f, bank)
    assert [r[0] for r in rows] == list(bank.scales)
    text = energy_table_csv(f, bank)
    assert text.splitlines()[0] == "j,l2,linf" and len(text.splitlines()) == len(rows) + 1


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**31 - 1))
def test_hardy_norm_homogeneous(c, seed):
    g = Grid(1, 128)
    bank = build_filter_bank(g)
    lat = DyadicLattice(g)
    f = SampledFunction(g, np.random.default_rng(seed).standard_normal(128))
    w = power_weight(g, 0.5)
    base = local_hardy_norm(f, 1, w, bank, lat, 2)
    assert local_hardy_norm(f * c, 1, w, bank, lat, 2) == pytest.approx(abs(c) * base, rel=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_profiles_nonnegative(seed):
    g = Grid(1, 128)
    bank = build_filter_bank(g)
    lat = DyadicLattice(g)
    f = SampledFunction(g, np.random.default_rng(seed).standard_normal(128))
    assert discrete_square_function(f, bank, lat, 2).values.values.min() >= 0
    assert oscillation_square_function(f, bank, lat, 2, "inf").combined().values.values.min() >= 0
