import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from leewave.oracles import (MorseParams, kummer_dM, kummer_M, lyra_kernel, lyra_kernel_x,
                             morse_eigenvalues, morse_regular_solution, morse_sigma,
                             poisson_kernel)
from leewave.spectral import solve_regular, spectral_density


# --------------------------------------------------------------------------
# Kummer M
# --------------------------------------------------------------------------

@pytest.mark.parametrize("a, b", [(0.3, 1.7), (-2.5 + 1j, 3 - 2j), (1.0, 2.0)])
def test_kummer_at_zero_is_one(a, b):
    assert kummer_M(a, b, 0.0) == 1.0


@pytest.mark.parametrize("s", [0.5, 5.0, 29.0, 31.0, 50.0, 120.0])
def test_kummer_equal_parameters_is_exponential(s):
    assert abs(kummer_M(1.7, 1.7, s) / math.exp(s) - 1) < 1e-12


@pytest.mark.parametrize("s", [0.5, 5.0, 50.0])
def test_kummer_one_two_closed_form(s):
    with mp.workdps(50):
        brute = mp.nsum(lambda n: s**n / mp.factorial(n + 1), [0, mp.inf])
    assert abs(kummer_M(1, 2, s) / complex(brute) - 1) < 1e-12
    assert abs(kummer_M(1, 2, s).real / (math.expm1(s) / s) - 1) < 1e-12


CASES = [(-3.2, 2.1, 40.0), (0.3 - 5j, 1 - 10j, 5.44), (-2.5, 1.7, 100.0), (0.5, 1.3, 35.0),
         (-9.3, 1.4, 148.0), (0.5 - 1.2j, 1.0 + 2.4j, 2.72), (1.5 + 0.7j, 2.4 + 1.4j, 29.9)]


@pytest.mark.parametrize("a, b, s", CASES)
def test_kummer_matches_mpmath(a, b, s):
    with mp.workdps(40):
        ref = complex(mp.hyp1f1(a, b, s))
    assert abs(kummer_M(a, b, s) / ref - 1) < 1e-12


@pytest.mark.parametrize("a, b, s", CASES)
def test_kummer_ode_residual(a, b, s):
    M = kummer_M(a, b, s)
    M1 = kummer_dM(a, b, s)
    M2 = kummer_dM(a, b, s, order=2)
    scale = abs(s * M2) + abs((b - s) * M1) + abs(a * M)
    assert abs(s * M2 + (b - s) * M1 - a * M) <= 1e-8 * scale


@pytest.mark.parametrize("s", [31.0, 40.0, 60.0])
def test_kummer_branches_agree_beyond_switch(s):
    for a, b in ((-0.7, 2.4), (0.5 - 1.2j, 1.0 + 2.4j)):
        series = kummer_M(a, b, s, s_switch=math.inf)
        asym = kummer_M(a, b, s, s_switch=0.0)
        assert abs(asym / series - 1) < 1e-12


@pytest.mark.parametrize("b", [0.0, -3.0, -2.0 + 1e-13])
def test_kummer_rejects_nonpositive_integer_beta(b):
    with pytest.raises(ValueError):
        kummer_M(0.5, b, 1.0)


# --------------------------------------------------------------------------
# Morse problem
# --------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [-0.5, 0.3, 1.0, 5.0])
def test_morse_regular_solution_initial_data(morse, lam):
    h = 1e-5
    v = morse_regular_solution(morse, lam, np.array([0.0, h, 2 * h]))
    assert v[0] == 0.0
    slope = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    assert slope == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [0.3, 1.0, 5.0])
def test_morse_regular_solution_matches_ode(morse, morse_potential, lam):
    z = np.linspace(0, 10, 41)
    exact = morse_regular_solution(morse, lam, z)
    ode = solve_regular(morse_potential, lam, z).v
    assert np.max(np.abs(exact - ode)) < 1e-6


def test_morse_regular_solution_bounded_oscillation(morse):
    z = np.linspace(20, 40, 201)
    lam = 2.0
    v = morse_regular_solution(morse, lam, z)
    amp = math.sqrt(1 / (math.pi * math.sqrt(lam) * morse_sigma(morse, lam)))
    assert np.max(np.abs(v)) == pytest.approx(amp, rel=1e-3)
    assert np.count_nonzero(np.diff(np.sign(v))) >= 8


def test_morse_sigma_free_limit():
    weak = MorseParams(Q=1e-12, a=1.0, z0=1.0, F0=1.0)
    for lam in (0.2, 3.0):
        assert morse_sigma(weak, lam) == pytest.approx(math.sqrt(lam) / math.pi, rel=1e-5)


def test_morse_sigma_matches_jost(morse, morse_potential):
    for lam in np.logspace(-1, 2, 7):
        exact = morse_sigma(morse, lam)
        assert exact > 0
        assert abs(spectral_density(morse_potential, lam, "jost") / exact - 1) < 1e-8


def test_canonical_morse_has_one_bound_state(morse):
    ev = morse_eigenvalues(morse)
    assert len(ev) == 1
    assert -0.182 <= ev[0] / morse.F0 <= -0.178
    assert math.sqrt(morse.F0 - ev[0]) / math.sqrt(morse.F0) == pytest.approx(1.086, abs=0.002)


def test_deep_well_energy_law():
    # z0 = 3 puts the ground deep in the repulsive wall; e^{s0} still fits a double
    deep = MorseParams(Q=100.0, a=1.0, z0=3.0, F0=1.0)
    kappas = [math.sqrt(-l) for l in morse_eigenvalues(deep)]
    assert len(kappas) == 10
    for j, k in enumerate(sorted(kappas, reverse=True), start=1):
        law = math.sqrt(deep.Q) - deep.a * (j - 0.5)
        assert abs(k - law) <= 0.01 * law


def test_kummer_overflow_is_reported():
    with pytest.raises(OverflowError, match="double range"):
        kummer_M(0.5, 21.0, 8000.0)


@pytest.mark.parametrize("kappa", [0.5, 2.0])
def test_rescaling_invariance(morse, kappa):
    other = morse.scaled(kappa)
    ev0 = morse_eigenvalues(morse)[0] / morse.F0
    ev1 = morse_eigenvalues(other)[0] / other.F0
    assert ev1 == pytest.approx(ev0, abs=1e-10)
    for lam in (0.1, 1.0, 30.0):
        s0 = morse_sigma(morse, lam * morse.F0) / math.sqrt(morse.F0)
        s1 = morse_sigma(other, lam * other.F0) / math.sqrt(other.F0)
        assert s1 == pytest.approx(s0, rel=1e-10)


def test_rescaled_params():
    p = MorseParams.canonical().scaled(2.0)
    assert (p.Q, p.a, p.z0, p.F0) == pytest.approx((0.25, 0.5, 2.0, 0.25))


def test_morse_params_validation():
    with pytest.raises(ValueError):
        MorseParams(Q=-1, a=1, z0=1, F0=1)


# --------------------------------------------------------------------------
# Poisson and constant-F kernels
# --------------------------------------------------------------------------

def test_poisson_on_axis():
    for z in (0.1, 1.0, 7.0):
        assert poisson_kernel(0.0, z) == pytest.approx(1 / (math.pi * z), rel=1e-15)


def test_poisson_unit_mass():
    for z in (0.3, 2.0):
        X = 1e4
        body = quad(lambda x: poisson_kernel(x, z), -X, X, points=[0.0], limit=400)[0]
        tail = 2 * z / (math.pi * X)  # int_{|x|>X} z/(pi x^2)
        assert body + tail == pytest.approx(1.0, abs=1e-6)


def test_poisson_laplace_form():
    ref = quad(lambda m: math.exp(-m) * math.sin(m), 0, math.inf)[0] / math.pi
    assert poisson_kernel(1.0, 1.0) == pytest.approx(ref, abs=1e-6)


def test_poisson_rejects_origin():
    with pytest.raises(ValueError):
        poisson_kernel(0.0, 0.0)


def test_lyra_vanishes_on_ground():
    assert np.all(lyra_kernel(1.0, np.array([-3.0, 0.5, 4.0]), 0.0) == 0.0)


def test_lyra_rejects_x_zero():
    with pytest.raises(ValueError):
        lyra_kernel(1.0, 0.0, 1.0)


def test_lyra_reduces_to_poisson_for_tiny_F():
    for x, z in ((-2.0, 1.0), (3.0, 0.5)):
        assert lyra_kernel(1e-12, x, z) == pytest.approx(poisson_kernel(x, z), abs=1e-9)


def test_lyra_evanescent_against_oscillatory_quadrature():
    with mp.workdps(25):
        for ax, z in ((0.05, 0.1), (1.05, 2.0), (9.95, 10.0)):
            ref = mp.quadosc(lambda m: mp.exp(-m * ax) * mp.sin(mp.sqrt(m * m + 1) * z),
                             [0, mp.inf], omega=z) / mp.pi
            assert lyra_kernel(1.0, -ax, z) == pytest.approx(float(ref), abs=1e-9)


@pytest.mark.parametrize("z", [0.5, 1.5, 3.0])
def test_lyra_windward_derivative_asymptotics(z):
    # fit c2/x^2 + c4/x^4 + c6/x^6 to K_x on the far windward side
    x = -np.linspace(30.0, 80.0, 11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kx = lyra_kernel_x(1.0, x, z)
    design = np.column_stack([x**-2.0, x**-4.0, x**-6.0])
    c = np.linalg.lstsq(design, kx, rcond=None)[0]
    assert c[0] == pytest.approx(math.sin(z) / math.pi, rel=1e-4, abs=1e-8)
    assert c[1] == pytest.approx(3 * z * math.cos(z) / math.pi, rel=2e-2, abs=1e-4)


@pytest.mark.parametrize("z", [0.7, 2.0])
def test_lyra_far_field_decay(z):
    x = -np.array([50.0, 100.0, 200.0, 500.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        xk = x * lyra_kernel(1.0, x, z)
    # x K = -sin(z)/pi + O(1/x^2)
    err = np.abs(xk + math.sin(z) / math.pi)
    assert err[-1] < 1e-4
    assert np.all(np.diff(err) < 0) or err.max() < 1e-4
