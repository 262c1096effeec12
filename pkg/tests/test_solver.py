import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmkplab import solver as sol
from rmkplab.dispersion import phase
from rmkplab.spectral import SpectralField, make_grid, sobolev_norm, to_physical, to_spectral

TWO_PI = 2 * np.pi


def grid8():
    return make_grid(8, 8, TWO_PI, TWO_PI)


def hand_convolution(c, g):
    """(u^2)^ by the lattice convolution sum_a c(a) c(z - a) dA / 2pi, no FFT."""
    n = g.nx
    out = np.zeros_like(c)
    dA = g.dxi * g.deta
    for a1 in range(n):
        for a2 in range(n):
            if c[a1, a2] == 0:
                continue
            for b1 in range(n):
                for b2 in range(n):
                    if c[b1, b2] != 0:
                        out[(a1 + b1) % n, (a2 + b2) % n] += c[a1, a2] * c[b1, b2] * dA / TWO_PI
    return out


def test_convention_constants():
    assert sol.PHASE_SIGN == 1
    assert sol.DUHAMEL_FACTOR == -1.0


def test_model_params_regime():
    with pytest.raises(ValueError):
        sol.ModelParams(beta=1.0)
    with pytest.raises(ValueError):
        sol.ModelParams(gamma=0.0)
    sol.ModelParams(gamma=0.0, check_regime=False)


def test_linear_multiplier_table():
    g = make_grid(16, 16, TWO_PI, 2 * TWO_PI)
    dt = 0.01
    tab = sol.linear_multiplier(g, dt=dt)
    assert np.allclose(np.abs(tab), 1, atol=1e-15)
    m = sol.multiplier(g)
    XI, ETA = g.mesh()
    i, j = 3, 5
    mirror = (-i) % 16, (-j) % 16
    assert m[mirror] == pytest.approx(-m[i, j], rel=1e-15)
    assert tab[1, 0] == 1.0
    assert tab[2, 0] == pytest.approx(np.exp(7.5j * dt), abs=1e-15)


def test_linear_finite_difference():
    # truncation error is ~ dt |m| / 2, so keep to modes with |m| <= 1
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    u0 = sol.random_ic(g, 0.1, kmax=1, seed=3)
    dt = 1e-6
    u1 = sol.advance(sol.init_state(u0, dt, nonlinear=False)).u
    fd = (u1.coeffs - u0.coeffs) / dt
    exact = 1j * sol.multiplier(g) * u0.coeffs
    assert np.linalg.norm(fd - exact) / np.linalg.norm(exact) <= 1e-6


def test_nonlinear_term_zero():
    g = grid8()
    assert not np.any(sol.nonlinear_term(SpectralField(g, np.zeros((8, 8)))).coeffs)


def test_nonlinear_term_cosine():
    g = grid8()
    X, _ = g.coords()
    N = sol.nonlinear_term(to_spectral(g, np.cos(X))).coeffs
    # u^2 = (1 + cos 2x)/2 ; c(+-2, 0) = pi/2, times i xi = +-2i
    want = np.zeros((8, 8), complex)
    want[2, 0], want[6, 0] = 1j * np.pi, -1j * np.pi
    assert np.allclose(N, want, atol=1e-13)


def test_nonlinear_term_vs_hand_convolution():
    g = grid8()
    rng = np.random.default_rng(0)
    c = np.zeros((8, 8), complex)
    for j, k in [(1, 0), (1, 1), (-1, 1), (1, -1)]:
        z = rng.standard_normal() + 1j * rng.standard_normal()
        c[j % 8, k % 8] += z
        c[-j % 8, -k % 8] += np.conj(z)
    u = SpectralField(g, c)
    XI, _ = g.mesh()
    want = 1j * XI * hand_convolution(c, g) * sol.dealias_mask(g)
    assert np.allclose(sol.nonlinear_term(u).coeffs, want, atol=1e-12)


def test_nonlinear_term_physical_space():
    g = make_grid(128, 128, TWO_PI, TWO_PI)
    X, Y = g.coords()
    u = np.sin(X) * np.cos(Y) + 0.5 * np.cos(2 * X + Y)
    N = sol.nonlinear_term(to_spectral(g, u))
    sq = u * u
    sh = lambda k: np.roll(sq, -k, 0)
    fd = (8 * (sh(1) - sh(-1)) - (sh(2) - sh(-2))) / (12 * g.dx)
    ref = to_spectral(g, fd).coeffs * sol.dealias_mask(g)
    assert np.linalg.norm(N.coeffs - ref) / np.linalg.norm(ref) <= 1e-3


def test_etdrk4_coefficients_match_closed_forms():
    # at |z| ~ 1 the closed forms have no cancellation problem
    m = np.array([0.7, -1.3, 2.9])
    dt = 0.5
    s = sol.ETDRK4(m, dt)
    z = 1j * m * dt
    f1 = dt * (-4 - z + np.exp(z) * (4 - 3 * z + z ** 2)) / z ** 3
    f2 = dt * (2 + z + np.exp(z) * (z - 2)) / z ** 3
    f3 = dt * (-4 - 3 * z - z ** 2 + np.exp(z) * (4 - z)) / z ** 3
    Q = dt * (np.exp(z / 2) - 1) / z
    for a, b in [(s.f1, f1), (s.f2, f2), (s.f3, f3), (s.Q, Q)]:
        assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_etdrk4_small_z_limits():
    s = sol.ETDRK4(np.array([0.0, 1e-9]), 0.1)
    assert np.allclose(s.f1, 0.1 / 6) and np.allclose(s.f2, 0.1 / 6) and np.allclose(s.f3, 0.1 / 6)
    assert np.allclose(s.Q, 0.05)


def test_linear_propagation_exact():
    g = make_grid(32, 32, 8 * np.pi, 8 * np.pi)
    u0 = sol.gaussian_ic(g, 0.1)
    tr = sol.solve(u0, T=1.0, dt=0.01, nonlinear=False)
    exact = np.exp(1j * sol.multiplier(g)) * u0.coeffs
    assert np.max(np.abs(tr.fields[-1].coeffs - exact)) <= 1e-12 * np.max(np.abs(exact))
    for s1, s2 in [(-0.5, 0), (1, 1)]:
        assert sobolev_norm(tr.fields[-1], s1, s2) == pytest.approx(sobolev_norm(u0, s1, s2), rel=1e-12)


def test_richardson_error_ratio():
    g = make_grid(64, 64, 8 * np.pi, 8 * np.pi)
    u0 = sol.gaussian_ic(g, 0.5)
    ends = [sol.solve(u0, T=0.5, dt=dt).fields[-1] for dt in (1 / 64, 1 / 128, 1 / 256)]
    e1, e2 = sobolev_norm(ends[0] - ends[1]), sobolev_norm(ends[1] - ends[2])
    assert 16 * 0.7 <= e1 / e2 <= 16 * 1.3


def test_zero_data_stays_zero():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    tr = sol.solve(SpectralField(g, np.zeros((16, 16))), T=0.1, dt=0.01)
    assert all(not np.any(f.coeffs) for f in tr.fields)


def test_tiny_amplitude_norms_constant():
    g = make_grid(32, 32, 8 * np.pi, 8 * np.pi)
    tr = sol.solve(sol.gaussian_ic(g, 1e-6), T=0.5, dt=1e-2, sample_every=10, s1=-0.5, s2=1.0)
    assert np.max(np.abs(tr.sobolev / tr.sobolev[0] - 1)) <= 1e-8


def test_reality_mean_and_times():
    g = make_grid(32, 32, 4 * np.pi, 4 * np.pi)
    tr = sol.solve(sol.random_ic(g, 0.2, seed=1), T=0.2, dt=1e-2, sample_every=5)
    assert np.all(np.diff(tr.times) > 0)
    for f in tr.fields:
        assert np.all(f.coeffs[0, :] == 0)
        w = np.fft.ifft2(f.coeffs) / g.norm_factor
        assert np.max(np.abs(w.imag)) <= 1e-12 * np.max(np.abs(w))


def test_solve_rejects_bad_times():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    with pytest.raises(ValueError):
        sol.solve(sol.gaussian_ic(g), T=0.15, dt=0.1)
    c = np.ones((16, 16), complex)
    with pytest.raises(ValueError):
        sol.solve(SpectralField(g, c), T=0.1, dt=0.1)


def test_nonfinite_aborts():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    c = sol.gaussian_ic(g).coeffs.copy()
    c[1, 1] = np.nan
    with pytest.raises(FloatingPointError):
        sol.advance(sol.init_state(SpectralField(g, c), 0.01))


def test_kp_comparison_rate():
    g = make_grid(32, 32, 4 * np.pi, 4 * np.pi)
    t, dist, ref = sol.kp_comparison(sol.gaussian_ic(g, 1e-3), 0.5, 1e-2, sample_every=10)
    assert dist[0] == 0
    assert np.all(dist[1:] > 0)
    # the linear propagators differ by at most t/|xi| per mode
    assert np.all(dist <= 1.01 * ref + 1e-15)
    assert np.all(np.diff(dist) > 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(0.01, 0.3))
def test_unitary_linear_flow_property(seed, T):
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    u0 = sol.random_ic(g, 1.0, seed=seed)
    st_ = sol.init_state(u0, T, nonlinear=False)
    u1 = sol.advance(st_).u
    assert sobolev_norm(u1, 0.3, -0.2) == pytest.approx(sobolev_norm(u0, 0.3, -0.2), rel=1e-12)


def test_picard_zero_data():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    rep = sol.picard_iterate(SpectralField(g, np.zeros((16, 16))), 0.1, n_iters=3)
    assert np.all(rep.diffs == 0) and not np.any(rep.iterates[-1].coeffs)


def test_picard_contraction_matches_solver():
    g = make_grid(32, 32, 4 * np.pi, 4 * np.pi)
    u0 = sol.random_ic(g, 0.05, seed=1)
    rep = sol.picard_iterate(u0, 0.1, n_iters=8)
    assert rep.converged and rep.contraction
    assert np.all(rep.ratios < 0.5)
    ref = sol.solve(u0, T=0.1, dt=1e-3).fields[-1]
    assert sobolev_norm(rep.iterates[-1] - ref) / sobolev_norm(ref) <= 1e-4


def test_picard_first_iterate_is_free_wave():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    u0 = sol.random_ic(g, 0.05, seed=2)
    rep = sol.picard_iterate(u0, 0.2, n_iters=2)
    free = np.exp(0.2j * sol.multiplier(g)) * u0.coeffs * sol.dealias_mask(g)
    assert np.allclose(rep.iterates[0].coeffs, free, atol=1e-15)


def test_picard_ratio_grows_with_amplitude():
    g = make_grid(16, 16, 4 * np.pi, 4 * np.pi)
    amps = [0.05, 0.5, 5.0, 50.0]
    first = [sol.picard_iterate(sol.random_ic(g, a, seed=4), 0.5, n_iters=3, max_panels=16).ratios[0]
             for a in amps]
    assert np.all(np.diff(first) > 0)
    assert first[0] < 1 < first[-1]


def test_picard_rejects_bad_T():
    g = make_grid(16, 16, TWO_PI, TWO_PI)
    with pytest.raises(ValueError):
        sol.picard_iterate(sol.gaussian_ic(g), 1.5)


def test_phase_matches_multiplier():
    g = make_grid(16, 16, TWO_PI, 3.0)
    XI, ETA = g.mesh()
    nz = XI != 0
    assert np.array_equal(sol.multiplier(g)[nz], phase(XI[nz], ETA[nz]))
