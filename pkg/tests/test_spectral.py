import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmkplab.spectral import (NormSpec, SpaceTimeField, SpectralField, bourgain_norm, bump_window,
                              field_from_dict, field_to_dict, free_evolution, l2_physical,
                              load_field, make_grid, ones_window, pvariation_norm, save_field,
                              sobolev_norm, spacetime_l2, to_physical, to_spectral)
from rmkplab.estimates import random_band_field

TWO_PI = 2 * np.pi


def brute_pvar(V, p):
    """Enumerate every sub-partition (interior subsets with both ends optional)."""
    V = np.asarray(V, dtype=float).reshape(len(V), -1)
    n = len(V)
    best = 0.0
    for r in range(2, n + 1):
        for idx in itertools.combinations(range(n), r):
            s = sum(np.linalg.norm(V[b] - V[a]) ** p for a, b in zip(idx, idx[1:]))
            best = max(best, s)
    return best ** (1 / p)


def test_make_grid_lattices():
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    assert sorted(g.xi) == list(range(-4, 4))
    g = make_grid(16, 8, 2 * TWO_PI, TWO_PI)
    assert g.dxi == 0.5 and g.deta == 1.0


@pytest.mark.parametrize("args", [(7, 8, 1, 1), (8, 8, 0, 1), (8, 8, 1, -1), (4, 8, 1, 1)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_lattice_symmetric():
    g = make_grid(16, 8, 3.0, 5.0)
    xi = set(np.round(g.xi / g.dxi).astype(int))
    nyq = -g.nx // 2
    assert all(-j in xi for j in xi if j != nyq)


def test_constant_and_cosine():
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    c = to_spectral(g, np.ones((8, 8))).coeffs
    assert np.count_nonzero(np.abs(c) > 1e-12) == 1 and abs(c[0, 0]) > 0
    X, _ = g.coords()
    c = to_spectral(g, np.cos(X)).coeffs
    nz = np.argwhere(np.abs(c) > 1e-12)
    assert sorted(map(tuple, nz)) == [(1, 0), (7, 0)]
    assert c[1, 0] == pytest.approx(c[7, 0])


def test_round_trip_and_parseval():
    rng = np.random.default_rng(0)
    for n in (8, 64, 512):
        g = make_grid(n, n, 3.0, 7.0)
        u = rng.standard_normal((n, n))
        f = to_spectral(g, u)
        assert np.max(np.abs(to_physical(f) - u)) <= 1e-12 * np.max(np.abs(u))
        assert sobolev_norm(f) == pytest.approx(l2_physical(g, u), rel=1e-12)


def test_size_mismatch():
    with pytest.raises(ValueError):
        to_spectral(make_grid(8, 8, 1, 1), np.zeros((8, 16)))


def test_sobolev_single_mode():
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    c = np.zeros((8, 8), complex)
    c[1, 0] = 1.0
    f = SpectralField(g, c)
    assert sobolev_norm(f, -0.5, 0) == pytest.approx(2 ** -0.5, rel=1e-15)
    assert sobolev_norm(f) == 1.0


def test_sobolev_monotone_away_from_origin():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    rng = np.random.default_rng(1)
    c = rng.standard_normal((16, 16)) + 0j
    c[0, :] = 0
    c[:, 0] = 0
    f = SpectralField(g, c)
    s = np.linspace(-1, 1, 9)
    v1 = [sobolev_norm(f, a, 0.0) for a in s]
    v2 = [sobolev_norm(f, 0.0, a) for a in s]
    assert np.all(np.diff(v1) > 0) and np.all(np.diff(v2) > 0)


def test_hermitian_and_mean():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    f = random_band_field(g, np.random.default_rng(2))
    assert f.is_real() and f.has_zero_mean()
    c = f.coeffs.copy()
    c[1, 1] += 1j
    assert not SpectralField(g, c).is_real()


def test_bourgain_b0_equals_windowed_l2():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    u0 = random_band_field(g, np.random.default_rng(4))
    st_ = free_evolution(u0, 128, 1 / 16)
    b0 = bourgain_norm(st_, NormSpec())
    assert b0 == pytest.approx(spacetime_l2(st_), rel=1e-10)
    # W(t) is unitary, so the windowed value factors as ||psi||_{l2(dt)} ||u0||
    psi = bump_window(st_.times)
    direct = math.sqrt(math.fsum(psi ** 2) * st_.dt) * sobolev_norm(u0)
    assert b0 == pytest.approx(direct, rel=1e-12)


def test_bourgain_on_shell_mode():
    # with no window the demodulated mode is constant in t, so lambda = 0 only
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    c = np.zeros((8, 8), complex)
    c[2, 1] = 1.0
    u0 = SpectralField(g, c)
    st_ = free_evolution(u0, 64, 0.1, window=ones_window)
    b0 = bourgain_norm(st_, NormSpec())
    for b in (0.3, 0.55, 1.0):
        assert bourgain_norm(st_, NormSpec(b=b)) == pytest.approx(b0, rel=1e-12)


def test_bourgain_linear_bound_factor_three():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    rng = np.random.default_rng(5)
    for s1, s2 in [(0, 0), (-0.5, 0), (0.5, 1.0)]:
        u0 = random_band_field(g, rng, kmax=3)
        v = bourgain_norm(free_evolution(u0, 256, 1 / 32), NormSpec(s1, s2, 0.505))
        r = v / sobolev_norm(u0, s1, s2)
        assert 1 / 3 <= r <= 3


def test_bourgain_rejects_xi0_with_sigma():
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    vals = np.zeros((8, 8, 8), complex)
    vals[:, 0, 1] = 1.0
    st_ = SpaceTimeField(g, 8, 0.1, vals)
    with pytest.raises(ValueError):
        bourgain_norm(st_, NormSpec(sigma=0.5))


def test_spacetime_validation():
    g = make_grid(8, 8, TWO_PI, TWO_PI)
    with pytest.raises(ValueError):
        SpaceTimeField(g, 6, 0.1, np.zeros((6, 8, 8)))
    with pytest.raises(ValueError):
        SpaceTimeField(g, 8, 0.1, np.zeros((8, 8, 8)), window=lambda t: 2 + 0 * t)


def test_window_shape():
    t = np.linspace(-3, 3, 601)
    w = bump_window(t)
    assert np.all(w[np.abs(t) <= 1] == 1) and np.all(w[np.abs(t) >= 2] == 0)
    assert np.all((w >= 0) & (w <= 1))


def test_pvariation_examples():
    assert pvariation_norm(np.zeros((5, 3)), 2) == 0
    assert pvariation_norm([0, 1, 0], 2) == pytest.approx(math.sqrt(2))
    assert pvariation_norm([0, 0.5, 1], 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pvariation_norm([1.0], 2)
    with pytest.raises(ValueError):
        NormSpec(p=0.5)


def test_pvariation_vs_enumeration():
    rng = np.random.default_rng(8)
    V = rng.standard_normal((10, 4))
    assert pvariation_norm(V, 2) == pytest.approx(brute_pvar(V, 2), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=9))
def test_pvariation_monotone_in_p(path):
    vals = [pvariation_norm(path, p) for p in (1, 1.5, 2, 3, 4)]
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(vals, vals[1:]))


def test_field_json_round_trip(tmp_path):
    g = make_grid(8, 16, 3.0, 4.0)
    f = random_band_field(g, np.random.default_rng(9))
    save_field(f, tmp_path / "f.json")
    h = load_field(tmp_path / "f.json")
    assert h.grid == g and np.array_equal(h.coeffs, f.coeffs)
    with pytest.raises(ValueError):
        field_from_dict({"format": "other"})
    d = field_to_dict(f)
    assert d["coeffs"][:2] == [f.coeffs[0, 0].real, f.coeffs[0, 0].imag]


def test_pvariation_single_increment_exact_and_large_p():
    d = 3.4984825478778907
    for p in (1, 2, 3, 4, 7.5):
        assert pvariation_norm([0.0, d], p) == d
    # unscaled d^p = 1e400 would overflow here
    assert pvariation_norm([0.0, 1e10, 0.0], 40) == pytest.approx(2 ** (1 / 40) * 1e10, rel=1e-14)


def test_sobolev_norm_of_box_data_k6():
    import rmkplab.illposed as ip
    from rmkplab.dispersion import bracket
    g = make_grid(8192, 256, 64 * np.pi, np.pi)
    d = ip.build_illposed_data(6, grid=g)
    u = d.u0
    # direct summation over the lattice points, no FFT layout involved
    want = math.sqrt(math.fsum(bracket(u.xi) ** -1 * np.abs(u.values) ** 2) * u.cell)
    assert sobolev_norm(d.field(), -0.5, 0.0) == pytest.approx(want, rel=1e-6)
