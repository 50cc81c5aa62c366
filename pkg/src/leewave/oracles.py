"""Closed-form reference solutions.

* the Poisson kernel ``K0 = z / (pi (x^2 + z^2))`` of the free problem,
* the kernel for constant Scorer parameter (Lyra's formula),
* the Morse potential ``q = Q (exp(-2a(z-z0)) - 2 exp(-a(z-z0)))``, whose
  regular solutions, spectral density and eigenvalues are expressed through
  the Kummer function ``M = 1F1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import exp1, loggamma, rgamma

S_SWITCH = 30.0
_POLE_TOL = 1e-12


# --------------------------------------------------------------------------
# Kummer function
# --------------------------------------------------------------------------

def _check_beta(beta):
    if beta.imag == 0.0 or abs(beta.imag) < _POLE_TOL:
        r = round(beta.real)
        if r <= 0 and abs(beta.real - r) < _POLE_TOL:
            raise ValueError(f"beta = {beta} is (within 1e-12 of) a non-positive integer")


def _kummer_series(a, b, s, tol=1e-17, max_terms=100000):
    """Taylor series with compensated summation; returns (value, error estimate)."""
    term = 1.0 + 0.0j
    re, im = [1.0], [0.0]
    biggest = 1.0
    n = 0
    while True:
        term *= (a + n) / ((b + n) * (n + 1)) * s
        n += 1
        if term == 0:
            break
        re.append(term.real)
        im.append(term.imag)
        mag = abs(term)
        biggest = max(biggest, mag)
        ratio = abs((a + n) / ((b + n) * (n + 1))) * s
        if ratio < 0.5 and mag < tol * biggest and n > abs(a):
            break
        if n > max_terms:
            raise ArithmeticError(f"Kummer series did not converge for a={a}, b={b}, s={s}")
    value = complex(math.fsum(re), math.fsum(im))
    err = 1e-16 * biggest * math.sqrt(n) + 1e-300
    return value, err


def _asymptotic_sum(p, q, x, max_terms=200):
    """Optimally truncated sum of (p)_k (q)_k / (k! x^k); returns (sum, last term)."""
    term = 1.0 + 0.0j
    total = 1.0 + 0.0j
    smallest = math.inf
    for k in range(max_terms):
        nxt = term * (p + k) * (q + k) / ((k + 1) * x)
        if abs(nxt) >= smallest:
            break
        term = nxt
        smallest = abs(term)
        total += term
        if smallest < 1e-17 * abs(total):
            break
    return total, smallest


def _kummer_asymptotic(a, b, s):
    """Large-s expansion for real s > 0 (Stokes-line average for the recessive part)."""
    S1, e1 = _asymptotic_sum(1 - a, b - a, s)
    S2, e2 = _asymptotic_sum(a, a - b + 1, -s)
    lg_b = loggamma(b)
    try:
        c1 = cmath.exp(lg_b + s + (a - b) * math.log(s)) * complex(rgamma(a))
    except OverflowError:
        raise OverflowError(f"M({a}, {b}, {s}) exceeds the double range") from None
    c2 = cmath.exp(lg_b - a * math.log(s)) * complex(rgamma(b - a)) * cmath.cos(math.pi * a)
    value = c1 * S1 + c2 * S2
    err = abs(c1) * e1 + abs(c2) * e2 + 1e-16 * (abs(c1 * S1) + abs(c2 * S2))
    return value, err


def kummer_M(alpha, beta, s, s_switch=S_SWITCH):
    """Kummer confluent hypergeometric function ``M(alpha, beta, s)``.

    Parameters
    ----------
    alpha, beta : complex
        Parameters; ``beta`` must not be a non-positive integer.
    s : float
        Real argument, ``s >= 0``.
    s_switch : float
        Above this argument the large-s expansion is tried first.  It is kept
        only when its truncation error estimate beats the series' rounding
        estimate.

    Returns
    -------
    complex
    """
    a, b = complex(alpha), complex(beta)
    s = float(s)
    if s < 0:
        raise ValueError("kummer_M is implemented for real s >= 0")
    _check_beta(b)
    if s == 0.0:
        return 1.0 + 0.0j
    if s <= s_switch:
        return _kummer_series(a, b, s)[0]
    val_a, err_a = _kummer_asymptotic(a, b, s)
    if err_a <= 1e-13 * abs(val_a):
        return val_a
    val_s, err_s = _kummer_series(a, b, s)
    return val_s if err_s <= err_a else val_a


def kummer_dM(alpha, beta, s, order=1, s_switch=S_SWITCH):
    """Derivative ``d^order M / ds^order`` via ``M' = (alpha/beta) M(alpha+1, beta+1)``."""
    a, b = complex(alpha), complex(beta)
    coef = 1.0 + 0.0j
    for k in range(order):
        coef *= (a + k) / (b + k)
    return coef * kummer_M(a + order, b + order, s, s_switch)


# --------------------------------------------------------------------------
# Morse potential
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MorseParams:
    """Morse well ``q(z) = Q (exp(-2a(z-z0)) - 2 exp(-a(z-z0)))``.

    The Scorer parameter is ``F = F0 - q``, so ``F`` peaks at ``z0`` with
    excess ``Q`` over ``F0``.
    """

    Q: float
    a: float
    z0: float
    F0: float

    def __post_init__(self):
        if not (self.Q > 0 and self.a > 0 and self.F0 > 0):
            raise ValueError("Morse parameters need Q, a, F0 > 0")

    @classmethod
    def canonical(cls, F0=1.0):
        """The example ``F0 = Q = a^2 = z0^-2``."""
        return cls(Q=F0, a=math.sqrt(F0), z0=1.0 / math.sqrt(F0), F0=F0)

    def scaled(self, kappa):
        """Parameters after the length rescaling ``z -> kappa z``."""
        return MorseParams(Q=self.Q / kappa**2, a=self.a / kappa, z0=self.z0 * kappa,
                           F0=self.F0 / kappa**2)

    def times(self, factor):
        """Scale the well (``q -> factor q``) at fixed F0."""
        return MorseParams(Q=self.Q * factor, a=self.a, z0=self.z0, F0=self.F0)

    @property
    def s0(self) -> float:
        """Kummer variable at the ground, ``(2 sqrt(Q)/a) exp(a z0)``."""
        return 2.0 * math.sqrt(self.Q) / self.a * math.exp(self.a * self.z0)

    def s(self, z):
        return 2.0 * math.sqrt(self.Q) / self.a * np.exp(-self.a * (np.asarray(z, float) - self.z0))

    def q(self, z):
        e = np.exp(-self.a * (np.asarray(z, float) - self.z0))
        return self.Q * (e * e - 2.0 * e)

    @property
    def F_star(self) -> float:
        """Supremum of F on the half line ``z >= 0``."""
        if self.z0 >= 0:
            return self.F0 + self.Q
        e = math.exp(self.a * self.z0)
        return self.F0 + self.Q * (2 * e - e * e)

    def potential(self, zeta_max=30.0):
        """The Morse well as a :class:`leewave.spectral.Potential`."""
        from .spectral import Potential

        return Potential.morse(self, zeta_max=zeta_max)


def _morse_pair(params, lam):
    """Branches ``(s/s0)^nu exp(-(s-s0)/2) M(alpha, beta, s)`` for nu = -/+ i k/a."""
    k = cmath.sqrt(complex(lam))
    sq = math.sqrt(params.Q) / params.a
    out = []
    for sign in (1, -1):
        nu = -sign * 1j * k / params.a
        out.append((nu, nu + 0.5 - sq, 2 * nu + 1))
    return out


def _branch(params, nu, alpha, beta, z):
    s0 = params.s0
    s = float(params.s(z))
    M = kummer_M(alpha, beta, s)
    dM = kummer_dM(alpha, beta, s)
    pref = cmath.exp(nu * math.log(s / s0) - (s - s0) / 2)
    phi = pref * M
    dphi_ds = phi * (nu / s - 0.5) + pref * dM
    return phi, -params.a * s * dphi_ds


def morse_regular_solution(params, lam, z):
    """Regular solution ``v(z, lam)`` (``v(0)=0, v'(0)=1``) of the Morse problem.

    Combines the two Kummer branches with coefficients fixed by the initial
    conditions at ``z = 0``; valid for ``lam > 0`` and ``lam < 0``.  If the
    branch parameters hit a pole of ``M`` the spectral parameter is moved by
    ``1e-12``.

    Parameters
    ----------
    params : MorseParams
    lam : float
    z : float or array_like
        Altitudes ``>= 0``.

    Returns
    -------
    ndarray
        ``v`` at ``z`` (same shape as ``z``).
    """
    z = np.asarray(z, dtype=float)
    for attempt in range(3):
        try:
            branches = _morse_pair(params, lam)
            (p0, dp0), (m0, dm0) = (_branch(params, *b, 0.0) for b in branches)
            break
        except ValueError:
            lam = lam + 1e-12 * max(1.0, abs(lam))
    else:
        raise ValueError("could not avoid the Kummer pole")
    det = p0 * dm0 - m0 * dp0
    if abs(det) == 0:
        raise ValueError("singular branch system")
    c_plus = -m0 / det
    c_minus = p0 / det
    out = np.empty(z.shape)
    for idx, zz in np.ndenumerate(z):
        if zz == 0.0:
            out[idx] = 0.0
            continue
        p, _ = _branch(params, *branches[0], zz)
        m, _ = _branch(params, *branches[1], zz)
        out[idx] = (c_plus * p + c_minus * m).real
    return out if out.ndim else float(out)


def morse_sigma(params, lam):
    """Spectral density of the Morse problem,
    ``sqrt(lam)/pi * exp(s0) / |M(i sqrt(lam)/a + 1/2 - sqrt(Q)/a, 2i sqrt(lam)/a + 1, s0)|^2``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("the spectral density is defined for lam > 0")
    s0 = params.s0
    sq = math.sqrt(params.Q) / params.a
    out = np.empty(lam.shape)
    for idx, l in np.ndenumerate(lam):
        k = math.sqrt(l)
        M = kummer_M(1j * k / params.a + 0.5 - sq, 2j * k / params.a + 1.0, s0)
        # exp(s0) / |M|^2 evaluated in logs to survive deep wells
        out[idx] = k / math.pi * math.exp(s0 - 2.0 * math.log(abs(M)))
    return out if out.ndim else float(out)


def _eigen_condition(params, kappa):
    sq = math.sqrt(params.Q) / params.a
    val = kummer_M(kappa / params.a + 0.5 - sq, 2 * kappa / params.a + 1.0, params.s0)
    return val.real


def morse_eigenvalues(params, step=None):
    """Dirichlet eigenvalues of the Morse problem, in increasing order.

    Roots of ``M(kappa/a + 1/2 - sqrt(Q)/a, 2 kappa/a + 1, s0) = 0`` with
    ``kappa = sqrt(-lam)`` in ``(0, sqrt(F_star - F0)]``, bracketed by a scan
    of step ``a/10`` and refined by Brent's method.
    """
    kmax = math.sqrt(params.F_star - params.F0)
    if step is None:
        step = min(params.a / 10.0, kmax / 50.0)
    grid = np.arange(kmax, 0.0, -step)
    grid = np.append(grid, min(step, kmax) * 1e-6)
    vals = [_eigen_condition(params, k) for k in grid]
    roots = []
    for k_hi, k_lo, v_hi, v_lo in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v_hi == 0.0:
            roots.append(k_hi)
        elif v_hi * v_lo < 0:
            roots.append(brentq(lambda k: _eigen_condition(params, k), k_lo, k_hi,
                                xtol=1e-15, rtol=1e-15, maxiter=200))
    return sorted(-k * k for k in roots)


# --------------------------------------------------------------------------
# Poisson and Lyra kernels
# --------------------------------------------------------------------------

def poisson_kernel(x, z):
    """Poisson kernel of the upper half-plane, ``z / (pi (x^2 + z^2))``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r2 = x * x + z * z
    if np.any(r2 == 0):
        raise ValueError("the Poisson kernel is singular at the origin")
    return z / (np.pi * r2)


def _lyra_evanescent(F, ax, z):
    # (1/pi) int_0^inf exp(-mu|x|) sin(sqrt(mu^2+F) z) dmu, split as
    # sin(mu z)(cos(d z) - 1) + cos(mu z) sin(d z) + sin(mu z), d = sqrt(mu^2+F) - mu.
    # The slowly decaying F z / (2 (mu+1)) part of sin(d z) is integrated in closed form.
    def d(mu):
        return F / (math.sqrt(mu * mu + F) + mu)

    # exp(-mu |x|) < e^-40 beyond mu_end, so the oscillatory rule runs on a finite range
    c = 0.5 * F * z
    mu_end = 40.0 / ax
    kw = dict(limit=20000, epsabs=1e-14, epsrel=1e-12)
    i1 = quad(lambda m: math.exp(-m * ax) * (math.cos(d(m) * z) - 1.0), 0.0, mu_end,
              weight="sin", wvar=z, **kw)[0]
    i2 = quad(lambda m: math.exp(-m * ax) * (math.sin(d(m) * z) - c / (m + 1.0)), 0.0, mu_end,
              weight="cos", wvar=z, **kw)[0]
    p = complex(ax, -z)
    i3 = c * (cmath.exp(p) * complex(exp1(p))).real
    return (i1 + i2 + i3) / math.pi + z / (math.pi * (ax * ax + z * z))


def _lyra_radiated(F, x, z):
    # -(2/pi) int_0^sqrt(F) sin(mu x) sin(sqrt(F - mu^2) z) dmu with mu = sqrt(F) sin(phi)
    r = math.sqrt(F)
    val = quad(lambda p: math.sin(r * math.sin(p) * x) * math.sin(r * math.cos(p) * z) * r * math.cos(p),
               0.0, math.pi / 2, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return -2.0 * val / math.pi


def lyra_kernel(F, x, z, pieces=("evanescent", "radiated")):
    """Green's kernel for constant Scorer parameter ``F > 0``.

    ``K = (1/pi) int_0^inf exp(-mu|x|) sin(sqrt(mu^2+F) z) dmu
    - (2/pi) 1_{x>0} int_0^sqrt(F) sin(mu x) sin(sqrt(F-mu^2) z) dmu``,
    both integrals by adaptive quadrature.
    """
    xs, zs = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    if np.any(xs == 0):
        raise ValueError("the constant-F kernel is evaluated only for x != 0")
    out = np.zeros(xs.shape)
    for idx in np.ndindex(xs.shape):
        xx, zz = float(xs[idx]), float(zs[idx])
        if zz == 0.0:
            continue
        val = 0.0
        if "evanescent" in pieces:
            val += _lyra_evanescent(F, abs(xx), zz)
        if "radiated" in pieces and xx > 0:
            val += _lyra_radiated(F, xx, zz)
        out[idx] = val
    return out if out.ndim else float(out)


def lyra_kernel_x(F, x, z):
    """x-derivative of the constant-F kernel on the windward side (``x < 0``).

    ``K_x = (1/pi) int_0^inf mu exp(mu x) sin(sqrt(mu^2+F) z) dmu``.
    """
    xs, zs = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    if np.any(xs >= 0):
        raise ValueError("lyra_kernel_x is implemented for x < 0")
    out = np.zeros(xs.shape)
    kw = dict(limit=20000, epsabs=1e-15, epsrel=1e-12)
    for idx in np.ndindex(xs.shape):
        xx, zz = float(xs[idx]), float(zs[idx])
        if zz == 0.0:
            continue

        def d(m):
            return F / (math.sqrt(m * m + F) + m)

        mu_end = 50.0 / -xx
        i1 = quad(lambda m: m * math.exp(m * xx) * math.cos(d(m) * zz), 0.0, mu_end,
                  weight="sin", wvar=zz, **kw)[0]
        i2 = quad(lambda m: m * math.exp(m * xx) * math.sin(d(m) * zz), 0.0, mu_end,
                  weight="cos", wvar=zz, **kw)[0]
        out[idx] = (i1 + i2) / math.pi
    return out if out.ndim else float(out)
