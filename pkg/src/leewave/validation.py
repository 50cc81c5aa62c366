"""Cross-checks of the numerical pipeline against closed-form oracles.

Each check returns a :class:`Check` with the measured error, its tolerance
and a pass flag.  :func:`run_checks` runs the suite used by the ``validate``
command; :func:`format_report` renders it as a text table.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .kernel import Lattice, kernel_field
from .oracles import (MorseParams, kummer_M, lyra_kernel, morse_eigenvalues,
                      morse_regular_solution, morse_sigma, poisson_kernel)
from .spectral import (Potential, counting_bounds, find_bound_states, regular_table,
                       solve_regular, spectral_data, spectral_density)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def _check(name, value, tolerance, detail=""):
    value = float(value)
    return Check(name, value, float(tolerance), bool(np.isfinite(value) and value <= tolerance), detail)


def check_poisson(dx=0.25, x_max=10.0):
    """``F = 0``: assembled kernel against ``zeta / (pi (x^2 + zeta^2))``."""
    sp = spectral_data(Potential.free(0.0, 0.0))
    lat = Lattice.covering(dx, -x_max, x_max)
    zeta = np.linspace(0.1, 10.0, 34)
    kf = kernel_field(sp, lat, zeta)
    err = np.max(np.abs(kf.total() - poisson_kernel(*np.meshgrid(lat.x, zeta))))
    return _check("poisson kernel (F = 0)", err, 1e-4, f"{len(lat)} x {len(zeta)} grid")


def check_lyra(dx=0.5, x_max=10.0):
    """``F = 1``: assembled kernel against the adaptive-quadrature constant-F kernel."""
    sp = spectral_data(Potential.free(1.0, 0.0))
    lat = Lattice.covering(dx, -x_max, x_max)
    zeta = np.linspace(0.1, 10.0, 12)
    kf = kernel_field(sp, lat, zeta)
    X, Z = np.meshgrid(lat.x, zeta)
    err = np.max(np.abs(kf.total() - lyra_kernel(1.0, X, Z)))
    return _check("constant-F kernel (F = 1)", err, 1e-4, f"{len(lat)} x {len(zeta)} grid")


def check_morse_eigenvalue():
    """Canonical Morse well: shooting against the Kummer root, and the band
    ``lambda_1 / F0 in [-0.182, -0.178]``."""
    params = MorseParams.canonical()
    exact = morse_eigenvalues(params)
    states = find_bound_states(params.potential(30.0))
    if len(exact) != 1 or len(states) != 1:
        return _check("Morse eigenvalue", math.inf, 1e-8,
                      f"{len(states)} shooting vs {len(exact)} Kummer bound states")
    lam_k, lam_s = exact[0], states[0].lam
    band = -0.182 <= lam_s / params.F0 <= -0.178
    err = abs(lam_k - lam_s) if band else math.inf
    return _check("Morse eigenvalue (shooting vs Kummer)", err, 1e-8,
                  f"lambda_1 = {lam_s:.12f}, frequency {math.sqrt(params.F0 - lam_s):.6f}")


def check_morse_sigma():
    """Spectral density: limit formula and Jost route against the closed form."""
    params = MorseParams.canonical()
    pot = params.potential(30.0)
    worst = 0.0
    for lam in (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0):
        exact = morse_sigma(params, lam)
        for method in ("limit", "jost"):
            worst = max(worst, abs(spectral_density(pot, lam, method=method) / exact - 1.0))
    return _check("Morse spectral density (relative)", worst, 1e-8, "limit and Jost routes")


def check_regular_solution():
    """Regular solution by ODE and by Magnus propagation against the Kummer form."""
    params = MorseParams.canonical()
    pot = params.potential(30.0)
    zeta = np.linspace(0.0, 8.0, 33)
    worst = 0.0
    lams = np.array([-0.5, 0.3, 2.0, 25.0])
    mag, _ = regular_table(pot, lams, zeta)
    for k, lam in enumerate(lams):
        exact = morse_regular_solution(params, lam, zeta)
        scale = max(1.0, float(np.max(np.abs(exact))))
        ode = solve_regular(pot, lam, zeta).v
        worst = max(worst, np.max(np.abs(ode - exact)) / scale,
                    np.max(np.abs(mag[:, k] - exact)) / scale)
    return _check("Morse regular solution", worst, 1e-7, "ODE and Magnus paths")


def check_kummer():
    """Kummer M: ``M(a, a, s) = e^s`` and agreement of the two branches at the seam."""
    worst = 0.0
    for s in (0.5, 10.0, 29.9, 30.1, 45.0):
        worst = max(worst, abs(kummer_M(1.3, 1.3, s) / math.exp(s) - 1.0))
    for a, b in ((-0.7, 2.4), (0.5 - 1.2j, 1.0 + 2.4j), (2.0 + 0.3j, 3.5)):
        for s in (32.0, 40.0):
            series = kummer_M(a, b, s, s_switch=math.inf)
            asym = kummer_M(a, b, s, s_switch=0.0)
            worst = max(worst, abs(asym / series - 1.0))
    return _check("Kummer M identities", worst, 1e-12, "exp identity and branch seam")


def check_counting_bounds():
    """Bound-state counts of ``a * (Morse well)`` lie between the integral bounds."""
    base = MorseParams.canonical()
    counts = []
    ok = True
    for a in (1, 4, 16):
        pot = base.times(a).potential(30.0)
        n = len(morse_eigenvalues(base.times(a)))
        lower, upper = counting_bounds(pot)
        ok &= lower <= n <= upper
        counts.append(n)
    ok &= all(b >= a for a, b in zip(counts, counts[1:]))
    return _check("counting-bound sandwich", 0.0 if ok else 1.0, 0.0, f"counts {counts}")


CHECKS = (check_poisson, check_lyra, check_morse_eigenvalue, check_morse_sigma,
          check_regular_solution, check_kummer, check_counting_bounds)


def run_checks(checks=CHECKS):
    """Run the oracle suite in a fixed order."""
    results = []
    for fn in checks:
        t0 = time.perf_counter()
        res = fn()
        res.seconds = round(time.perf_counter() - t0, 3)
        results.append(res)
    return results


def format_report(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'error':>10}  {'tol':>8}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.value:>10.3e}  {r.tolerance:>8.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}  {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)


def as_records(results, timings=False):
    """JSON-ready records; timings are left out by default to keep output reproducible."""
    out = []
    for r in results:
        d = asdict(r)
        if not timings:
            d.pop("seconds")
        out.append(d)
    return out
