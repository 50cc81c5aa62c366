"""Spectral data of the half-line operator ``L = -d^2/dzeta^2 + q`` with a Dirichlet
condition at ``zeta = 0``.

``q = F0 - F`` is the deviation of the Scorer parameter from its asymptotic
value.  The potential is truncated at ``zeta_max``; beyond that point every
solution is a free one and is continued in closed form.

Two evaluation routes are provided:

* per-lambda adaptive integration (:func:`solve_regular`,
  :func:`spectral_density`, :func:`find_bound_states`), the reference route;
* :func:`regular_table`, a vectorized fourth-order Magnus propagator that
  evaluates ``v(zeta, lambda)`` and ``sigma(lambda)`` for tens of thousands of
  lambda at once.  The kernel assembly and the transform pair use it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import ConvergenceError, InputValidationError

DEFAULT_RTOL = 1e-10
MAGNUS_STEP = 0.01
SIGMA_RTOL = 1e-11
THRESHOLD_TOL = 1e-8


# --------------------------------------------------------------------------
# Potentials
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    """Truncated potential ``q = F0 - F`` on ``[0, zeta_max)``.

    Parameters
    ----------
    q_func : callable
        Vectorized untruncated ``q``; it is only evaluated on ``[0, zeta_max]``.
    zeta_max : float
        Truncation altitude; ``q = 0`` at and above it.
    F0, F_star : float
        Asymptotic Scorer constant and supremum of F.
    kind, params : str, dict
        Recipe used to serialize and rebuild the potential.
    """

    q_func: Callable
    zeta_max: float
    F0: float
    F_star: float
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.zeta_max >= 0:
            raise InputValidationError("zeta_max must be non-negative")
        if not self.F0 >= 0:
            raise InputValidationError("F0 must be non-negative")
        if self.F_star < self.F0:
            raise InputValidationError("F_star must not be below F0")

    def q(self, zeta):
        """Truncated potential."""
        z = np.asarray(zeta, dtype=float)
        inside = z < self.zeta_max
        out = np.zeros(z.shape)
        if np.any(inside):
            out[inside] = self.q_func(z[inside])
        return out if out.ndim else float(out)

    def F(self, zeta):
        """Scorer parameter ``F0 - q``."""
        return self.F0 - self.q(zeta)

    @classmethod
    def free(cls, F0=0.0, zeta_max=0.0):
        """Constant Scorer parameter, ``q = 0``."""
        return cls(lambda z: np.zeros_like(np.asarray(z, float)), float(zeta_max), float(F0),
                   float(F0), kind="free", params={})

    @classmethod
    def morse(cls, params, zeta_max=30.0):
        """Morse well from :class:`leewave.oracles.MorseParams`."""
        return cls(params.q, float(zeta_max), params.F0, params.F_star, kind="morse",
                   params=dict(Q=params.Q, a=params.a, z0=params.z0, F0=params.F0))

    @classmethod
    def from_samples(cls, zeta, F, F0, F_star=None, zeta_max=None):
        """Potential from samples of F (natural cubic spline in zeta)."""
        zeta = np.asarray(zeta, dtype=float)
        F = np.asarray(F, dtype=float)
        if zeta[0] != 0.0 or np.any(np.diff(zeta) <= 0):
            raise InputValidationError("zeta samples must start at 0 and increase")
        spline = CubicSpline(zeta, float(F0) - F, bc_type="natural")
        zmax = float(zeta[-1]) if zeta_max is None else min(float(zeta_max), float(zeta[-1]))
        F_star = float(np.max(F)) if F_star is None else float(F_star)
        return cls(spline, zmax, float(F0), max(F_star, float(F0)), kind="samples",
                   params=dict(zeta=zeta, F=F))

    @classmethod
    def from_scorer(cls, scorer, zeta_max=None):
        """Potential of a :class:`leewave.atmosphere.ScorerData` with F0 set."""
        if scorer.F0 is None or scorer.zeta_uniform is None:
            raise InputValidationError("scorer data needs the zeta map and F0 (use with_asymptotics)")
        return cls.from_samples(scorer.zeta_uniform, scorer.F_uniform, scorer.F0, scorer.F_star,
                                zeta_max)

    @property
    def breakpoints(self):
        """Knots inside ``(0, zeta_max)`` where a sampled potential loses smoothness."""
        if self.kind != "samples":
            return np.zeros(0)
        z = np.asarray(self.params["zeta"], dtype=float)
        return z[(z > 0) & (z < self.zeta_max)]

    def integrals(self):
        """Finite-grid proxies ``int |q|``, ``int zeta |q|`` and a truncation-tail estimate."""
        zm = self.zeta_max
        if zm == 0:
            return dict(l1=0.0, first_moment=0.0, tail=0.0)
        grid = np.linspace(0.0, zm, 4001)
        aq = np.abs(self.q_func(grid))
        l1 = float(np.trapezoid(aq, grid))
        m1 = float(np.trapezoid(grid * aq, grid))
        # exponential fit to |q| over the top fifth of the domain
        sel = grid >= 0.8 * zm
        tail = math.inf
        good = aq[sel] > 0
        if np.count_nonzero(good) > 2:
            slope, icpt = np.polyfit(grid[sel][good], np.log(aq[sel][good]), 1)
            if slope < 0:
                tail = float(math.exp(icpt + slope * zm) / -slope)
        elif not np.any(aq[sel] > 0):
            tail = 0.0
        return dict(l1=l1, first_moment=m1, tail=tail)


# --------------------------------------------------------------------------
# Adaptive integration
# --------------------------------------------------------------------------

def _free_continue(lam, v0, dv0, d):
    """Free solution with data (v0, dv0) advanced by distance ``d >= 0``."""
    d = np.asarray(d, dtype=float)
    if lam > 0:
        k = math.sqrt(lam)
        c, s = np.cos(k * d), np.sin(k * d)
        return v0 * c + dv0 * s / k, -v0 * k * s + dv0 * c
    if lam < 0:
        k = math.sqrt(-lam)
        c, s = np.cosh(k * d), np.sinh(k * d)
        return v0 * c + dv0 * s / k, v0 * k * s + dv0 * c
    return v0 + dv0 * d, dv0 + 0.0 * d


class _Segments:
    """Consecutive ``solve_ivp`` runs glued into one result.

    ``y`` holds the states at the requested points (or the final state);
    ``sol`` evaluates the piecewise dense output.
    """

    def __init__(self, runs, bounds, y):
        self.runs = runs
        self.bounds = bounds
        self.y = y

    def sol(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        asc = np.sort(self.bounds)
        idx = np.clip(np.searchsorted(asc, t, side="right") - 1, 0, len(self.runs) - 1)
        if self.bounds[0] > self.bounds[-1]:
            idx = len(self.runs) - 1 - idx
        out = np.empty((self.y.shape[0], len(t)), dtype=self.y.dtype)
        for n in np.unique(idx):
            sel = idx == n
            out[:, sel] = self.runs[n].sol(t[sel])
        return out


def _rhs(q, lam, with_norm):
    if with_norm:
        def rhs(t, y):
            return [y[1], (q(t) - lam) * y[0], y[0] * y[0]]
    else:
        def rhs(t, y):
            return [y[1], (q(t) - lam) * y[0]]
    return rhs


def _cubic_piece(spline, a, b):
    """``q`` on the knot interval containing ``[a, b]``, evaluated by Horner's rule."""
    i = int(np.clip(np.searchsorted(spline.x, 0.5 * (a + b)) - 1, 0, len(spline.x) - 2))
    x0 = float(spline.x[i])
    c0, c1, c2, c3 = (float(c) for c in spline.c[:, i])

    def q(t):
        d = t - x0
        return ((c0 * d + c1) * d + c2) * d + c3
    return q


def _integrate(potential, lam, y0, t0, t1, rtol, t_eval=None, dense=False, with_norm=False):
    qf = potential.q_func
    lam = float(lam)
    scale = 1.0 / max(1.0, math.sqrt(abs(lam)))
    atol = rtol * 1e-3 * np.array([scale, 1.0, scale * scale][: len(y0)])

    def run(rhs, a, b, y, te, dense_output):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol, t_eval=te,
                        dense_output=dense_output)
        if not sol.success:
            raise ConvergenceError(f"integration failed at lambda={lam}: {sol.message}")
        return sol

    # sampled potentials are cubic splines: integrate knot to knot, since a
    # high-order step across a jump in the third derivative loses accuracy
    knots = potential.breakpoints
    knots = knots[(knots > min(t0, t1)) & (knots < max(t0, t1))]
    if len(knots) == 0 or not isinstance(qf, CubicSpline):
        return run(_rhs(lambda t: float(qf(t)), lam, with_norm), t0, t1, y0, t_eval, dense)
    bounds = np.concatenate(([t0], knots if t1 > t0 else knots[::-1], [t1]))
    te = None if t_eval is None else np.asarray(t_eval, dtype=float)
    runs, pieces = [], []
    y = np.asarray(y0)
    last = len(bounds) - 2
    for n, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        rhs = _rhs(_cubic_piece(qf, a, b), lam, with_norm)
        sol = run(rhs, float(a), float(b), y, None, dense or te is not None)
        y = sol.y[:, -1]
        runs.append(sol)
        if te is not None:
            lo, hi = min(a, b), max(a, b)
            # each point belongs to the first segment that reaches it
            if n == last:
                sel = (te >= lo) & (te <= hi)
            elif b > a:
                sel = (te >= lo) & (te < hi)
            else:
                sel = (te > lo) & (te <= hi)
            if np.any(sel):
                pieces.append(sol.sol(te[sel]))
    if te is None:
        out = y[:, None]
    else:
        out = np.concatenate(pieces, axis=1) if pieces else np.zeros((len(y), 0))
        if out.shape[1] != len(te):
            raise ConvergenceError("t_eval points outside the integration interval")
    return _Segments(runs, bounds, out)


@dataclass(frozen=True, eq=False)
class RegularSolution:
    """Regular solution ``v(., lam)`` with ``v(0) = 0``, ``v'(0) = 1`` on a zeta grid."""

    lam: float
    zeta: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    v_end: float
    dv_end: float
    zeta_max: float


def solve_regular(potential, lam, zeta=None, rtol=DEFAULT_RTOL):
    """Integrate ``v'' + (lam - q) v = 0``, ``v(0) = 0``, ``v'(0) = 1``.

    Adaptive DOP853 up to ``zeta_max``; closed-form free continuation above.

    Parameters
    ----------
    potential : Potential
    lam : float
    zeta : array_like, optional
        Output grid (default: 201 points on ``[0, zeta_max]``).
    rtol : float
        Relative local error tolerance.

    Returns
    -------
    RegularSolution
    """
    zm = potential.zeta_max
    if zeta is None:
        zeta = np.linspace(0.0, zm, 201) if zm > 0 else np.array([0.0])
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta < 0):
        raise InputValidationError("zeta must be non-negative")
    v = np.empty(zeta.shape)
    dv = np.empty(zeta.shape)
    inside = zeta <= zm
    if zm > 0:
        pts = np.unique(np.append(zeta[inside], zm))
        sol = _integrate(potential, lam, [0.0, 1.0], 0.0, zm, rtol, t_eval=pts)
        v_end, dv_end = float(sol.y[0, -1]), float(sol.y[1, -1])
        pos = np.searchsorted(pts, zeta[inside])
        v[inside] = sol.y[0, pos]
        dv[inside] = sol.y[1, pos]
    else:
        v_end, dv_end = 0.0, 1.0
        v[inside], dv[inside] = 0.0, 1.0
    out = ~inside
    if np.any(out):
        v[out], dv[out] = _free_continue(lam, v_end, dv_end, zeta[out] - zm)
    return RegularSolution(float(lam), zeta, v, dv, v_end, dv_end, zm)


def spectral_density(potential, lam, method="limit", rtol=SIGMA_RTOL):
    """Spectral density ``sigma(lam)`` for ``lam > 0``.

    ``limit``
        ``1 / (pi (v'^2/k + k v^2))`` at ``zeta_max``, where it is exactly
        conserved (``k = sqrt(lam)``).
    ``jost``
        Kodaira's formula ``k / (pi |f(0)|^2)`` with the Jost solution
        ``f ~ exp(i k zeta)`` integrated backward from ``zeta_max``.
    """
    lam = float(lam)
    if not lam > 0:
        raise InputValidationError("the spectral density needs lam > 0")
    k = math.sqrt(lam)
    zm = potential.zeta_max
    if method == "limit":
        if zm == 0:
            v, dv = 0.0, 1.0
        else:
            sol = _integrate(potential, lam, [0.0, 1.0], 0.0, zm, rtol)
            v, dv = sol.y[0, -1], sol.y[1, -1]
        return 1.0 / (math.pi * (dv * dv / k + k * v * v))
    if method == "jost":
        if zm == 0:
            return k / math.pi
        e = complex(math.cos(k * zm), math.sin(k * zm))
        sol = _integrate(potential, lam, np.array([e, 1j * k * e]), zm, 0.0, rtol)
        f0 = sol.y[0, -1]
        return k / (math.pi * abs(f0) ** 2)
    raise InputValidationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# Bound states
# --------------------------------------------------------------------------

def node_count(potential, lam, rtol=DEFAULT_RTOL):
    """Number of zeros of ``v(., lam)`` on ``(0, inf)`` for ``lam <= 0``.

    Interior zeros are counted as sign changes on a grid finer than the
    minimal zero spacing ``pi / sqrt(max(lam - q))``; a zero of the closed-form
    continuation beyond ``zeta_max`` is added analytically.
    """
    if lam > 0:
        raise InputValidationError("node counts are finite only for lam <= 0")
    zm = potential.zeta_max
    if zm == 0:
        return 0
    sol = _integrate(potential, lam, [0.0, 1.0], 0.0, zm, rtol, dense=True)
    probe = np.linspace(0.0, zm, 4001)
    kmax = math.sqrt(max(float(np.max(lam - potential.q_func(probe))), 1e-12))
    h = min(0.05, math.pi / (4.0 * kmax))
    pts = np.linspace(0.0, zm, int(math.ceil(zm / h)) + 1)[1:]
    v = sol.sol(pts)[0]
    signs = np.sign(v[v != 0])
    count = int(np.count_nonzero(signs[1:] != signs[:-1]))
    v_end, dv_end = sol.y[0, -1], sol.y[1, -1]
    if lam < 0:
        ratio = -math.sqrt(-lam) * v_end / dv_end if dv_end != 0 else -math.inf
        if 0 < ratio < 1:
            count += 1
    elif v_end * dv_end < 0:
        count += 1
    return count


def matching_function(potential, lam, rtol=DEFAULT_RTOL):
    """Normalized ``v'(zeta_max) + sqrt(-lam) v(zeta_max)``; zero exactly at eigenvalues."""
    kappa = math.sqrt(-lam)
    zm = potential.zeta_max
    sol = _integrate(potential, lam, [0.0, 1.0], 0.0, zm, rtol)
    v, dv = sol.y[0, -1], sol.y[1, -1]
    return (dv + kappa * v) / math.hypot(dv, kappa * v)


class BoundState:
    """Dirichlet eigenfunction normalized by ``v'(0) = 1``.

    The profile comes from a backward integration of the decaying free
    solution ``exp(-kappa (zeta - zeta_max))``, which is stable for all
    altitudes, rescaled to unit slope at the ground.
    """

    def __init__(self, potential, lam, rtol=DEFAULT_RTOL, norm2=None):
        self.potential = potential
        self.lam = float(lam)
        self.kappa = math.sqrt(-self.lam)
        self.rtol = rtol
        self._sol = None
        self._scale = None
        self._norm2 = norm2
        self.dirichlet_residual = None

    def _solve(self):
        zm = self.potential.zeta_max
        sol = _integrate(self.potential, self.lam, [1.0, -self.kappa, 0.0], zm, 0.0, self.rtol,
                         dense=True, with_norm=True)
        v0, dv0, i0 = sol.y[:, -1]
        self._sol = sol.sol
        self._scale = 1.0 / dv0
        self.dirichlet_residual = float(abs(v0 / dv0))
        integral = -i0 * self._scale**2
        self._norm2 = float(integral + self._scale**2 / (2.0 * self.kappa))

    @property
    def norm2(self):
        """``||v||^2`` including the analytic tail ``v(zeta_max)^2 / (2 kappa)``."""
        if self._norm2 is None:
            self._solve()
        return self._norm2

    @property
    def frequency(self):
        """Horizontal wavenumber ``sqrt(F0 - lam)`` of the trapped mode."""
        return math.sqrt(self.potential.F0 - self.lam)

    def values(self, zeta):
        """Eigenfunction at arbitrary altitudes."""
        if self._sol is None:
            self._solve()
        zeta = np.asarray(zeta, dtype=float)
        zm = self.potential.zeta_max
        out = np.empty(zeta.shape)
        inside = zeta < zm
        if np.any(inside):
            out[inside] = self._scale * self._sol(zeta[inside])[0]
        out[~inside] = self._scale * np.exp(-self.kappa * (zeta[~inside] - zm))
        out[zeta == 0] = 0.0
        return out

    def __repr__(self):
        return f"BoundState(lam={self.lam!r}, norm2={self.norm2!r})"


def find_bound_states(potential, rtol=DEFAULT_RTOL, n_scan=32, max_depth=60,
                      threshold_tol=THRESHOLD_TOL):
    """Negative Dirichlet eigenvalues of ``L`` in ``[F0 - F_star, 0)``.

    Brackets come from Sturm node counts on a scan grid (subdivided until each
    bracket holds exactly one eigenvalue); each bracket is refined by Brent's
    method on :func:`matching_function`.  Eigenvalues with
    ``|lam| < threshold_tol * F0`` are rejected with a warning.

    Returns
    -------
    list of BoundState
        In increasing order of eigenvalue.
    """
    depth = potential.F_star - potential.F0
    if depth <= 0 or potential.zeta_max == 0:
        return []
    ref = potential.F0 if potential.F0 > 0 else depth
    lam_top = -threshold_tol * ref
    kappas = np.linspace(math.sqrt(depth), math.sqrt(-lam_top), n_scan)
    grid = list(-kappas**2)
    grid[-1] = lam_top
    counts = [node_count(potential, lam, rtol) for lam in grid]
    if counts[0] != 0:
        raise ConvergenceError("eigenvalue below F0 - F_star: F_star is underestimated")
    if any(b < a for a, b in zip(counts[:-1], counts[1:])):
        raise ConvergenceError("node count not monotone in lambda; increase integration accuracy")

    brackets = []

    def split(lo, hi, n_lo, n_hi, level):
        if n_hi - n_lo == 0:
            return
        if n_hi - n_lo == 1:
            brackets.append((lo, hi))
            return
        if level >= max_depth:
            raise ConvergenceError("could not separate eigenvalues; increase scan density")
        mid = 0.5 * (lo + hi)
        n_mid = node_count(potential, mid, rtol)
        split(lo, mid, n_lo, n_mid, level + 1)
        split(mid, hi, n_mid, n_hi, level + 1)

    for lo, hi, n_lo, n_hi in zip(grid[:-1], grid[1:], counts[:-1], counts[1:]):
        split(lo, hi, n_lo, n_hi, 0)

    states = []
    for lo, hi in brackets:
        f_lo = matching_function(potential, lo, rtol)
        f_hi = matching_function(potential, hi, rtol)
        if f_lo * f_hi > 0:
            raise ConvergenceError(f"no sign change of the matching function on [{lo}, {hi}]")
        lam = brentq(lambda l: matching_function(potential, l, rtol), lo, hi,
                     xtol=1e-14 * abs(lo), rtol=1e-13, maxiter=200)
        states.append(BoundState(potential, lam, rtol))

    if node_count(potential, 0.0, rtol) > counts[-1]:
        warnings.warn("an eigenvalue lies within the threshold band |lam| < "
                      f"{threshold_tol:g} F0 and was rejected", RuntimeWarning, stacklevel=2)
    return states


def counting_bounds(potential, M=None):
    """Integral bounds on the number ``n`` of bound states.

    ``upper = int zeta |q| dzeta`` and
    ``lower = floor(1/2 - int q dzeta / (pi M))`` with
    ``M >= sqrt(F_star - F0)`` (default equality).  ``lower`` is clipped at 0.

    Returns
    -------
    tuple (int, float)
    """
    depth = potential.F_star - potential.F0
    M_min = math.sqrt(max(depth, 0.0))
    if M is None:
        M = M_min if M_min > 0 else 1.0
    if not M > 0 or M < M_min * (1 - 1e-12):
        raise InputValidationError(f"M must be positive and at least sqrt(F_star - F0) = {M_min:g}")
    zm = potential.zeta_max
    if zm == 0:
        return 0, 0.0
    kw = dict(limit=1000, epsabs=1e-12, epsrel=1e-10)
    upper = quad(lambda z: z * abs(float(potential.q_func(z))), 0.0, zm, **kw)[0]
    int_q = quad(lambda z: float(potential.q_func(z)), 0.0, zm, **kw)[0]
    lower = max(0, int(math.floor(0.5 - int_q / (math.pi * M))))
    return lower, float(upper)


# --------------------------------------------------------------------------
# Bulk evaluation
# --------------------------------------------------------------------------

def _cos_sinc(w2):
    """``cos(s), sin(s)/s`` for ``w2 = -s^2`` and ``cosh(s), sinh(s)/s`` for ``w2 = s^2``."""
    s = np.sqrt(np.abs(w2))
    if np.all(w2 <= 0):
        return np.cos(s), np.sinc(s / np.pi)
    osc = w2 < 0
    C = np.empty_like(s)
    S = np.empty_like(s)
    C[osc] = np.cos(s[osc])
    S[osc] = np.sinc(s[osc] / np.pi)
    hyp = ~osc
    sh = s[hyp]
    C[hyp] = np.cosh(sh)
    with np.errstate(invalid="ignore", divide="ignore"):
        S[hyp] = np.where(sh < 1e-8, 1.0, np.sinh(sh) / np.where(sh == 0, 1.0, sh))
    return C, S


def regular_table(potential, lams, zeta, step=MAGNUS_STEP, chunk=8192):
    """Regular solutions for many spectral parameters at once.

    A fourth-order Magnus propagator with two Gauss points per step (exact
    for piecewise-constant q, so the error is controlled by the variation of
    q rather than by lambda).

    Parameters
    ----------
    potential : Potential
    lams : array_like
        Spectral parameters.
    zeta : array_like
        Output altitudes (``>= 0``).
    step : float
        Maximal step on ``[0, zeta_max]``.

    Returns
    -------
    v : ndarray, shape (len(zeta), len(lams))
    sigma : ndarray, shape (len(lams),)
        Spectral density from the conserved limit expression (NaN for
        ``lam <= 0``).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if np.any(zeta < 0):
        raise InputValidationError("zeta must be non-negative")
    zm = float(potential.zeta_max)
    inner = np.unique(zeta[(zeta > 0) & (zeta < zm)])
    if zm > 0:
        n = max(1, int(math.ceil(zm / step)))
        edges = np.union1d(np.linspace(0.0, zm, n + 1), inner)
    else:
        edges = np.zeros(1)
    h = np.diff(edges)
    off = h / (2.0 * math.sqrt(3.0))
    mid = 0.5 * (edges[:-1] + edges[1:])
    q1 = np.asarray(potential.q_func(mid - off), dtype=float) if len(h) else np.zeros(0)
    q2 = np.asarray(potential.q_func(mid + off), dtype=float) if len(h) else np.zeros(0)
    qbar = 0.5 * (q1 + q2)
    alpha = math.sqrt(3.0) / 12.0 * h * h * (q1 - q2)
    rec = np.full(len(edges), -1)
    rec[np.searchsorted(edges, inner)] = np.arange(len(inner))

    n_lam = len(lams)
    out = np.empty((len(zeta), n_lam))
    sigma = np.full(n_lam, np.nan)
    where_inner = np.searchsorted(inner, zeta)
    is_inner = (zeta > 0) & (zeta < zm)
    is_outer = zeta >= zm
    for start in range(0, n_lam, chunk):
        lam = lams[start:start + chunk]
        m = len(lam)
        v = np.zeros(m)
        dv = np.ones(m)
        buf = np.empty((len(inner), m))
        for i in range(len(h)):
            c = qbar[i] - lam
            hc = h[i] * c
            C, S = _cos_sinc(alpha[i] * alpha[i] + h[i] * hc)
            aS = S * alpha[i]
            v, dv = (C + aS) * v + (S * h[i]) * dv, (S * hc) * v + (C - aS) * dv
            r = rec[i + 1]
            if r >= 0:
                buf[r] = v
        block = out[:, start:start + m]
        block[zeta == 0] = 0.0
        if np.any(is_inner):
            block[is_inner] = buf[where_inner[is_inner]]
        if np.any(is_outer):
            d = (zeta[is_outer] - zm)[:, None]
            pos = lam > 0
            k = np.sqrt(np.abs(lam))[None, :]
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                trig = v * np.cos(k * d) + dv * np.sin(k * d) / np.where(k == 0, 1.0, k)
                hyper = v * np.cosh(k * d) + dv * np.sinh(k * d) / np.where(k == 0, 1.0, k)
            lin = v + dv * d
            block[is_outer] = np.where(pos, trig, np.where(lam < 0, hyper, lin))
        pos = lam > 0
        k = np.sqrt(lam[pos])
        sigma[start:start + m][pos] = 1.0 / (np.pi * (dv[pos] ** 2 / k + k * v[pos] ** 2))
    return out, sigma


# --------------------------------------------------------------------------
# Spectral data container and the transform pair
# --------------------------------------------------------------------------

@dataclass(eq=False)
class SpectralData:
    """Potential, bound states and tabulated spectral density.

    ``table`` evaluates regular solutions and the spectral density at
    arbitrary spectral parameters with the Magnus propagator; results are
    cached by ``(lams, zeta)``.
    """

    potential: Potential
    bound_states: list
    sigma_lambda: np.ndarray
    sigma_values: np.ndarray
    step: float = MAGNUS_STEP
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def F0(self):
        return self.potential.F0

    @property
    def F_star(self):
        return self.potential.F_star

    def table(self, lams, zeta):
        lams = np.ascontiguousarray(lams, dtype=float)
        zeta = np.ascontiguousarray(zeta, dtype=float)
        key = (lams.tobytes(), zeta.tobytes())
        if key not in self._cache:
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = regular_table(self.potential, lams, zeta, self.step)
        return self._cache[key]

    def bound_state_values(self, zeta):
        """Matrix ``(len(zeta), n_bound)`` of eigenfunction values."""
        zeta = np.asarray(zeta, dtype=float)
        if not self.bound_states:
            return np.zeros((len(zeta), 0))
        return np.column_stack([b.values(zeta) for b in self.bound_states])


def default_sigma_grid(F0):
    scale = max(F0, 1.0)
    return np.logspace(-3, 4, 141) * scale


def spectral_data(potential, sigma_lambda=None, rtol=DEFAULT_RTOL, step=MAGNUS_STEP):
    """Assemble :class:`SpectralData`: bound states plus a spectral-density table."""
    states = find_bound_states(potential, rtol=rtol)
    if sigma_lambda is None:
        sigma_lambda = default_sigma_grid(potential.F0)
    sigma_lambda = np.asarray(sigma_lambda, dtype=float)
    _, sigma = regular_table(potential, sigma_lambda, np.zeros(1), step)
    return SpectralData(potential, states, sigma_lambda, sigma, step)


@dataclass(frozen=True)
class LambdaQuadrature:
    """Quadrature rule for ``int (.) dlambda`` over the continuous spectrum."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.nodes) == 0:
            raise InputValidationError("empty lambda quadrature")

    @classmethod
    def gauss_mu(cls, mu_max, n_nodes=2000, nodes_per_panel=16):
        """Gauss-Legendre panels in ``mu = sqrt(lambda)`` on ``[0, mu_max]``.

        The Jacobian ``2 mu`` cancels the ``1/sqrt(lambda)`` growth of sigma
        at the threshold, so the transformed integrand is smooth.
        """
        n_panels = max(1, int(round(n_nodes / nodes_per_panel)))
        t, w = np.polynomial.legendre.leggauss(nodes_per_panel)
        edges = np.linspace(0.0, mu_max, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mu = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * t[None, :]).ravel()
        wmu = (half[:, None] * w[None, :]).ravel()
        return cls(mu * mu, 2.0 * mu * wmu)


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Transform of a function: continuous part on lambda nodes and bound-state part."""

    quadrature: LambdaQuadrature
    continuous: np.ndarray
    discrete: np.ndarray


def _zeta_weights(zeta):
    w = np.zeros_like(zeta)
    d = np.diff(zeta)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def expand(g, zeta, spectral, quadrature, zeta_weights=None):
    """Transform ``g_hat(lam) = int g v(., lam) dzeta`` plus bound-state projections.

    Parameters
    ----------
    g : array_like
        Samples of a compactly supported function.
    zeta : array_like
        Sample altitudes.
    spectral : SpectralData
    quadrature : LambdaQuadrature
    zeta_weights : array_like, optional
        Quadrature weights for the zeta integral (trapezoid by default).
    """
    g = np.asarray(g, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    w = _zeta_weights(zeta) if zeta_weights is None else np.asarray(zeta_weights, float)
    v, _ = spectral.table(quadrature.nodes, zeta)
    cont = (g * w) @ v
    disc = (g * w) @ spectral.bound_state_values(zeta)
    return Coefficients(quadrature, cont, disc)


def synthesize(coefficients, spectral, zeta):
    """Inverse transform
    ``sum_j g_j v_j / ||v_j||^2 + int g_hat(lam) v(., lam) sigma(lam) dlam``.
    """
    zeta = np.asarray(zeta, dtype=float)
    quad_rule = coefficients.quadrature
    v, sigma = spectral.table(quad_rule.nodes, zeta)
    out = v @ (quad_rule.weights * sigma * coefficients.continuous)
    if spectral.bound_states:
        norms = np.array([b.norm2 for b in spectral.bound_states])
        out = out + spectral.bound_state_values(zeta) @ (coefficients.discrete / norms)
    return out
