"""Acceptance criteria 1-10 with their stated tolerances.

Each test carries a ``criterion`` marker; the conftest prints one PASS/FAIL
line per criterion at the end of the run.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest

from leewave.atmosphere import compute_scorer, load_profile, sample_profile_path, with_asymptotics
from leewave.field import (BoundaryData, TerrainProfile, boundary_data, f_grid, pde_residual,
                           radiation_diagnostic, solve)
from leewave.kernel import Lattice, kernel_field
from leewave.oracles import (MorseParams, lyra_kernel, morse_eigenvalues, morse_sigma,
                             poisson_kernel)
from leewave.spectral import (LambdaQuadrature, Potential, counting_bounds, expand,
                              find_bound_states, spectral_data, spectral_density, synthesize)

from synthetic_atmosphere import G, _B, _T, _module_coefficients


def criterion(n, title):
    return pytest.mark.criterion(n, title)


# 1 ---------------------------------------------------------------------------

@criterion(1, "Poisson recovery for F = 0")
def test_poisson_recovery():
    t0 = time.perf_counter()
    sp = spectral_data(Potential.free(0.0, 0.0))
    lat = Lattice.covering(0.1, -9.95, 9.95)
    zeta = np.linspace(0.1, 10.0, 100)
    kf = kernel_field(sp, lat, zeta)
    elapsed = time.perf_counter() - t0
    X, Z = np.meshgrid(lat.x, zeta)
    assert np.all(np.abs(lat.x) <= 10) and np.all(lat.x != 0)
    assert np.max(np.abs(kf.total() - poisson_kernel(X, Z))) <= 1e-4
    assert elapsed <= 60


# 2 ---------------------------------------------------------------------------

@criterion(2, "constant-F kernel equals the closed-form kernel")
def test_constant_F_kernel():
    t0 = time.perf_counter()
    sp = spectral_data(Potential.free(1.0, 0.0))
    lat = Lattice.covering(0.25, -9.875, 9.875)
    zeta = np.linspace(0.1, 10.0, 34)
    kf = kernel_field(sp, lat, zeta)
    X, Z = np.meshgrid(lat.x, zeta)
    err = np.max(np.abs(kf.total() - lyra_kernel(1.0, X, Z)))
    elapsed = time.perf_counter() - t0
    assert err <= 1e-4
    assert elapsed <= 300


@criterion(2, "constant-F kernel equals the closed-form kernel")
def test_constant_F_windward_slope_coefficient():
    sp = spectral_data(Potential.free(1.0, 0.0))
    dx = 0.1
    lat = Lattice(dx, -301, -299)      # columns at -30.05 and -29.95
    zeta = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    K = kernel_field(sp, lat, zeta).total()
    Kx = (K[:, 1] - K[:, 0]) / dx     # centred at x = -30
    coefficient = Kx * 30.0**2
    assert np.all(np.abs(coefficient / (np.sin(zeta) / np.pi) - 1) <= 0.05)


# 3 ---------------------------------------------------------------------------

@criterion(3, "Morse eigenvalue and trapped frequency")
def test_morse_eigenvalue(morse):
    t0 = time.perf_counter()
    shooting = find_bound_states(morse.potential(30.0))
    kummer = morse_eigenvalues(morse)
    elapsed = time.perf_counter() - t0
    assert len(shooting) == 1 and len(kummer) == 1
    lam_s, lam_k = shooting[0].lam, kummer[0]
    for lam in (lam_s, lam_k):
        assert -0.182 <= lam / morse.F0 <= -0.178
    assert abs(lam_s - lam_k) <= 1e-8
    assert 1.084 <= math.sqrt(morse.F0 - lam_s) / math.sqrt(morse.F0) <= 1.088
    assert elapsed <= 60


# 4 ---------------------------------------------------------------------------

@criterion(4, "spectral density: limit formula, Jost route and closed form")
def test_sigma_cross_validation(morse, morse_potential):
    worst_routes = worst_exact = 0.0
    for lam in np.geomspace(1e-2, 1e4, 25) * morse.F0:
        s_lim = spectral_density(morse_potential, lam, method="limit")
        s_jost = spectral_density(morse_potential, lam, method="jost")
        exact = morse_sigma(morse, lam)
        worst_routes = max(worst_routes, abs(s_lim / s_jost - 1))
        worst_exact = max(worst_exact, abs(s_lim / exact - 1), abs(s_jost / exact - 1))
    assert worst_routes <= 1e-8
    assert worst_exact <= 1e-8


@criterion(4, "spectral density: limit formula, Jost route and closed form")
def test_sigma_high_energy_correction(morse_potential):
    lams = np.geomspace(1e2, 1e4, 9)
    sig = np.array([spectral_density(morse_potential, lam) for lam in lams])
    scaled = np.abs(sig - np.sqrt(lams) / np.pi) * np.sqrt(lams)
    # |sigma - sqrt(lam)/pi| <= C / sqrt(lam) with one C over the whole range
    C = scaled.max()
    assert np.all(np.abs(sig - np.sqrt(lams) / np.pi) <= C / np.sqrt(lams))
    assert scaled.max() <= 1.1 * scaled.min()


# 5 ---------------------------------------------------------------------------

@criterion(5, "counting bounds bracket the bound-state count")
def test_counting_bound_sandwich(morse):
    counts = []
    for a in (1, 4, 16):
        params = morse.times(a)
        pot = params.potential(30.0)
        n = len(find_bound_states(pot))
        assert n == len(morse_eigenvalues(params))
        lower, upper = counting_bounds(pot)
        assert lower <= n <= upper
        counts.append(n)
    assert counts == sorted(counts)


# 6 ---------------------------------------------------------------------------

@criterion(6, "expand then synthesize reproduces a bump")
def test_spectral_round_trip(morse_spectral):
    zeta = np.linspace(0.0, 6.0, 1201)
    inside = (zeta > 1) & (zeta < 3)
    g = np.zeros_like(zeta)
    g[inside] = np.exp(-1.0 / ((zeta[inside] - 1) * (3 - zeta[inside])))
    quad = LambdaQuadrature.gauss_mu(60.0, n_nodes=2000)
    assert len(quad.nodes) == 2000
    back = synthesize(expand(g, zeta, morse_spectral, quad), morse_spectral, zeta)
    rel = math.sqrt(np.trapezoid((back - g) ** 2, zeta) / np.trapezoid(g**2, zeta))
    assert rel <= 1e-3


# 7 ---------------------------------------------------------------------------

@criterion(7, "windward radiation condition")
def test_radiation_condition(morse_spectral):
    dx = 0.1
    bd = boundary_data(TerrainProfile.agnesi(1.0, 1.0, half_width=5.0), 1.0, f_grid(dx, -5, 5))
    assert abs(bd.mean) <= 1e-12 * bd.l1 and np.allclose(bd.f, -bd.f[::-1])
    lat = Lattice.covering(dx, -67.1, -12.9)
    kf = kernel_field(morse_spectral, lat, np.arange(1, 25) * 0.25)
    wf = solve(kf, bd, np.arange(-620, -179) * dx)
    rep = radiation_diagnostic(wf, morse_spectral, window=(-60.0, -20.0))
    assert rep["leading_power"] == 3
    assert len(rep["altitudes"]) == 3
    for alt in rep["altitudes"]:
        assert not alt["flagged"]
        assert abs(alt["exponent"] - 3.0) <= 0.1
        assert alt["monotone"]
        assert alt["relative_error"] <= 0.1


# 8 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fine_field(morse_spectral):
    dx = 0.01
    terrain = TerrainProfile.agnesi(1.0, 3.0)
    bd = boundary_data(terrain, 1.0, f_grid(dx, -30, 30))
    lat = Lattice.covering(dx, -40.1, 40.1)
    zeta = np.round(np.arange(1, 201) * 0.005, 12)
    kf = kernel_field(morse_spectral, lat, zeta)
    x = np.arange(-1000, 1001) * dx
    return terrain, kf, bd, solve(kf, bd, x)


@criterion(8, "field properties")
def test_pde_residual(fine_field, morse_potential):
    _, _, _, wf = fine_field
    res = pde_residual(wf, morse_potential.F)
    assert np.max(np.abs(res)) <= 1e-3 * np.max(np.abs(wf.w))


@criterion(8, "field properties")
def test_boundary_recovery(fine_field):
    terrain, _, bd, wf = fine_field
    j = int(np.argmin(np.abs(wf.zeta - 0.025)))
    assert wf.zeta[j] == 0.025
    assert np.max(np.abs(wf.w[j] - terrain.slope(wf.x))) <= 5e-2 * bd.linf


@criterion(8, "field properties")
def test_superposition_exact(fine_field):
    _, kf, bd, wf = fine_field
    other = boundary_data(TerrainProfile.bump(0.5, -4.0, 2.0), 1.0, bd.x)
    w_other = solve(kf, other, wf.x).w
    w_sum = solve(kf, bd + other, wf.x).w
    scale = np.max(np.abs(wf.w)) + np.max(np.abs(w_other))
    assert np.max(np.abs(w_sum - wf.w - w_other)) <= 1e-13 * scale


@criterion(8, "field properties")
def test_flat_terrain_zero_field(fine_field):
    _, kf, bd, wf = fine_field
    flat = boundary_data(TerrainProfile.flat(), 1.0, bd.x)
    assert np.all(solve(kf, flat, wf.x).w == 0.0)


# 9 ---------------------------------------------------------------------------

@criterion(9, "trapped waves keep their amplitude downstream")
def test_trapped_wave_envelope(morse_spectral):
    lat = Lattice.covering(0.1, 15.0, 105.0)
    zeta = np.array([0.5, 1.0, 1.5, 2.0])
    kf = kernel_field(morse_spectral, lat, zeta)
    near = (kf.x >= 20) & (kf.x <= 40)
    far = (kf.x >= 80) & (kf.x <= 100)
    K = kf.total()
    for j in range(len(zeta)):
        e_near, e_far = np.max(np.abs(K[j, near])), np.max(np.abs(K[j, far]))
        r_near, r_far = np.max(np.abs(kf.kr[j, near])), np.max(np.abs(kf.kr[j, far]))
        assert abs(e_far - e_near) <= 0.10 * e_near
        assert r_far <= 0.70 * r_near


# 10 --------------------------------------------------------------------------

@criterion(10, "Scorer coefficients")
def test_full_and_classical_regimes_agree_on_sample_profile():
    prof = load_profile(sample_profile_path())
    full = with_asymptotics(compute_scorer(prof, "full"))
    classical = with_asymptotics(compute_scorer(prof, "classical"))
    assert np.max(np.abs(full.F - classical.F) / np.abs(classical.F)) <= 1e-2


@criterion(10, "Scorer coefficients")
@pytest.mark.parametrize("z", [0.3, 1.1, 1.7, 2.9, 4.2, 5.5])
def test_two_forms_of_B_agree(z):
    c = _module_coefficients(z)
    with mp.workdps(40):
        density_form = float(_B(mp.mpf(z)))
        T, T1 = float(_T(mp.mpf(z))), float(mp.diff(_T, mp.mpf(z)))
    temperature_form = c["dA"] - (G + T1) * c["A"] / T
    assert abs(temperature_form / density_form - 1) <= 1e-8
    assert abs(c["B"] / density_form - 1) <= 1e-8
