import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import sici

from qarrival.core import (GaussianPacketSpec, Grid1D, WaveFunction,
                           make_gaussian, packet_amplitudes, superpose)
from qarrival.errors import InvalidSpec, RegimeError
from qarrival.wigner import (dm_squared_asymptotic, f_of_u, gaussian_wigner,
                             gaussian_wigner_streamed, p12_regimes,
                             phase_space_crossing_moments,
                             positivity_timescale, sine_integral,
                             theta_kernels, wigner_transform)


def test_f_at_zero_exact():
    assert f_of_u(0.0) == np.pi / 2.0


def test_f_against_library_tables():
    """Series plus continued fraction against an independent implementation."""
    us = np.concatenate([np.linspace(-300.0, 300.0, 12001),
                         [-10.0, 10.0, -10.0001, 10.0001, 0.0]])
    si, _ = sici(np.abs(us))
    ref = np.where(us >= 0, np.pi / 2.0 - si, np.pi / 2.0 + si)
    assert np.max(np.abs(f_of_u(us) - ref)) < 1e-10


def test_f_limits():
    assert abs(f_of_u(-50.0) - np.pi) <= 0.03
    assert abs(f_of_u(50.0)) <= 0.03
    # oscillates around cos(u)/u for large positive u
    assert abs(f_of_u(50.0) - np.cos(50.0) / 50.0) < 2e-3
    assert abs(f_of_u(-50.0) - (np.pi - np.cos(50.0) / 50.0)) < 2e-3


def test_sine_integral_consistency():
    us = np.linspace(0.0, 40.0, 161)
    si, _ = sici(us)
    assert np.max(np.abs(sine_integral(us) - si)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-200.0, max_value=200.0,
                 allow_nan=False, allow_infinity=False))
def test_f_reflection_identity(u):
    assert f_of_u(u) + f_of_u(-u) == pytest.approx(np.pi, abs=1e-10)


@pytest.fixture(scope="module")
def packet_1024():
    grid = Grid1D(-30.0, 30.0, 1024)
    spec = GaussianPacketSpec(5.0, -2.0, 1.0)
    return spec, make_gaussian(spec, grid)


def test_wigner_matches_gaussian_closed_form(packet_1024):
    spec, psi = packet_1024
    wg = wigner_transform(psi)
    Q, P = np.meshgrid(wg.q_grid, wg.p_grid, indexing="ij")
    exact = gaussian_wigner(spec, 0.0, P, Q).T
    assert np.max(np.abs(wg.w - exact)) < 1e-8


def test_wigner_marginals(packet_1024):
    _, psi = packet_1024
    g = psi.grid
    wg = wigner_transform(psi)
    pos = wg.marginal_position()
    assert np.trapezoid(np.abs(pos - np.abs(psi.amplitudes) ** 2), g.x) < 1e-6
    # momentum marginal against a direct transform on the half-spacing grid
    ft = (g.dx / np.sqrt(2 * np.pi)) * np.exp(
        -1j * np.outer(wg.p_grid, g.x)) @ psi.amplitudes
    mom = wg.marginal_momentum()
    assert np.trapezoid(np.abs(mom - np.abs(ft) ** 2), wg.p_grid) < 1e-6


def test_wigner_reality_guard(packet_1024):
    _, psi = packet_1024
    wg = wigner_transform(psi)
    assert wg.w.dtype == np.float64  # imaginary residue already checked inside


def test_wigner_superposition_negativity():
    grid = Grid1D(-30.0, 30.0, 1024)
    a = WaveFunction(grid, packet_amplitudes(grid, 5.0, -2.0, 1.0))
    b = WaveFunction(grid, packet_amplitudes(grid, -5.0, -2.0, 1.0))
    wg = wigner_transform(superpose([a, b], [1.0, 1.0]))
    assert wg.w.min() < -0.1  # interference fringes go deeply negative


def test_gaussian_wigner_normalization_and_peak():
    spec = GaussianPacketSpec(5.0, -2.0, 1.0)
    q = np.linspace(-40.0, 40.0, 1601)
    p = np.linspace(-8.0, 4.0, 801)
    Q, P = np.meshgrid(q, p, indexing="ij")
    for t in (0.0, 3.0):
        w = gaussian_wigner(spec, t, P, Q)
        total = np.trapezoid(np.trapezoid(w, p, axis=1), q)
        assert total == pytest.approx(1.0, abs=1e-10)
        iq, ip = np.unravel_index(np.argmax(w), w.shape)
        assert q[iq] == pytest.approx(spec.q0 + spec.p0 * t, abs=q[1] - q[0])
        assert p[ip] == pytest.approx(spec.p0, abs=p[1] - p[0])
        assert w.max() == pytest.approx(1.0 / np.pi, rel=1e-6)


def test_streamed_wigner_matches_dispersionless_on_ridge():
    spec = GaussianPacketSpec(5.0, -2.0, 1.0)
    q = np.linspace(-10.0, 10.0, 101)
    # along p = p0 the two forms agree at all times
    w1 = gaussian_wigner(spec, 4.0, np.full_like(q, spec.p0), q)
    w2 = gaussian_wigner_streamed(spec, 4.0, np.full_like(q, spec.p0), q)
    assert np.max(np.abs(w1 - w2)) < 1e-14


def test_theta_kernels_boundary_and_supports():
    wp, wd = theta_kernels(-2.0, 0.0, 5.0)
    assert wp == pytest.approx(np.pi / 2 / (2 * np.pi**2) * 0.5)
    assert wd == wp
    q = np.linspace(-5.0, 5.0, 41)
    p = np.full_like(q, -2.0)
    wp, wd = theta_kernels(p, q, 5.0)
    assert np.all(wp[q < 0] == 0.0)
    assert np.all(wd[q > 0] == 0.0)
    # supports are disjoint away from the shared half-weight point at q = 0
    assert np.max(np.abs((wp * wd)[q != 0.0])) == 0.0
    with pytest.raises(InvalidSpec):
        theta_kernels(-2.0, 1.0, 0.0)


def test_dm2_quadrature_vs_leading_order_scalings():
    """The quoted leading-order form carries the right 1/(|p0| sigma) scaling;
    the faithful quadrature of the defining integral lands at half of it
    (the tail integral of pi/2 - Si(u) is exactly 1)."""
    spec = GaussianPacketSpec(20.0, -2.0, 10.0)
    t1 = spec.arrival_time
    t2 = t1 + 40.0 / spec.energy
    numeric, asym = dm_squared_asymptotic(spec, t1, t2)
    assert asym == pytest.approx(1.0 / (np.sqrt(2 * np.pi**3) * 20.0), rel=1e-12)
    assert numeric == pytest.approx(0.5 * asym, rel=0.05)

    # doubling |p0| sigma halves the leading-order value, and the quadrature
    # follows the same scaling
    spec2 = GaussianPacketSpec(20.0, -4.0, 10.0)
    n2, a2 = dm_squared_asymptotic(spec2, spec2.arrival_time,
                                   spec2.arrival_time + 40.0 / spec2.energy)
    assert a2 == pytest.approx(asym / 2.0, rel=1e-12)
    assert n2 == pytest.approx(numeric / 2.0, rel=0.05)


def test_dm2_regime_guard():
    spec = GaussianPacketSpec(20.0, -2.0, 10.0)
    with pytest.raises(RegimeError):
        dm_squared_asymptotic(spec, 2.0, 22.0)       # packet not centred yet
    narrow = GaussianPacketSpec(10.0, -2.0, 1.0)
    with pytest.raises(RegimeError):
        dm_squared_asymptotic(narrow, 5.0, 5.1)      # E0 dt too small


def test_p12_broad_window_half():
    spec = GaussianPacketSpec(10.0, -2.0, 2.0)
    p12, regime = p12_regimes(spec, 5.0, 15.0)       # q_z / sigma = 10
    assert regime == "broad_window"
    assert p12 == pytest.approx(0.5, abs=0.05)


def test_p12_narrow_window_order():
    """q_z << sigma: p12 is of order q_z / sigma (within a factor two of the
    pi-weighted estimate) and still dominates dm^2."""
    spec = GaussianPacketSpec(20.0, -4.0, 20.0)      # |p0| sigma = 80
    t1 = spec.arrival_time
    q_z_over_sigma = 0.1
    dt = q_z_over_sigma * spec.sigma * spec.mass / abs(spec.p0)
    p12, regime = p12_regimes(spec, t1, t1 + dt)    # E0 dt = 4, inside regime
    assert regime == "narrow_window"
    estimate = np.pi * q_z_over_sigma / np.sqrt(2 * np.pi**3)
    assert 0.5 * estimate < p12 < 2.0 * estimate
    dm2, _ = dm_squared_asymptotic(spec, t1, t1 + dt)
    assert p12 / dm2 >= 10.0


def test_crossing_moments_collapse_matches_2d():
    """For a broad packet the momentum collapse reproduces the full 2D
    quadrature."""
    spec = GaussianPacketSpec(20.0, -2.0, 10.0)
    t1 = spec.arrival_time
    t2 = t1 + 10.0
    p12_c, dm2_c = phase_space_crossing_moments(spec, t1, t2, collapse_p=True)
    p12_f, dm2_f = phase_space_crossing_moments(spec, t1, t2)
    assert p12_c == pytest.approx(p12_f, abs=2e-3)
    assert dm2_c == pytest.approx(dm2_f, abs=2e-3)


def test_dispersionless_flag_exposes_the_gap():
    """The frozen-width form underestimates the spread state at sigma = 1, and
    the flag makes that visible instead of baking it in."""
    spec = GaussianPacketSpec(10.0, -2.0, 1.0)
    p12_exact, dm2_exact = phase_space_crossing_moments(spec, 5.0, 10.0)
    p12_froz, dm2_froz = phase_space_crossing_moments(spec, 5.0, 10.0,
                                                      dispersionless=True)
    assert abs(dm2_froz - dm2_exact) > 5 * abs(dm2_exact) * 0.05  # a real gap
    assert p12_froz != p12_exact


def test_positivity_single_gaussian(wide_packet):
    t_grid = np.linspace(0.0, 15.0, 301)
    rep = positivity_timescale(wide_packet, t_grid)
    assert rep.series.values[0] == 0.0
    assert rep.series.values.min() >= -1e-12
    assert rep.first_nonnegative == 0.0
    assert rep.threshold_time == pytest.approx(1.0 / rep.energy_spread)


def test_positivity_backflow_state_settles():
    g = Grid1D(-60.0, 60.0, 4096)
    a = WaveFunction(g, packet_amplitudes(g, 10.0, -1.0, 2.0))
    b = WaveFunction(g, packet_amplitudes(g, 10.0, -3.0, 2.0))
    psi = superpose([a, b], [1.0, 0.5 * np.exp(1j * 3.93)])
    rep = positivity_timescale(psi, np.linspace(0.0, 12.0, 241))
    late = rep.series.values[rep.series.times >= 3.0 / rep.energy_spread]
    assert late.min() >= -1e-3


def test_positivity_grid_validation(wide_packet):
    with pytest.raises(InvalidSpec):
        positivity_timescale(wide_packet, np.array([0.0, 1.0, 3.0]))
    with pytest.raises(InvalidSpec):
        positivity_timescale(wide_packet, np.array([1.0, 2.0, 3.0]))
