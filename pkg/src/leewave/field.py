"""Terrain, boundary data and the vertical-velocity field ``w = K * f``.

Grids: the kernel lives on the staggered lattice ``(m + 1/2) dx``, the
boundary data ``f`` on ``(k + 1/2) dx`` and the field on ``i dx``, so that every
difference ``x_i - x'_k`` is a kernel column.  ``K0 * f`` is integrated
against the cubic spline through ``f`` with the exact kernel (a kink-free
interpolant keeps the field smooth right down to the ground); ``(K - K0) * f``
is a direct discrete convolution with trapezoid weights after its
``zeta log r`` singular term is split off and integrated like ``K0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import InputValidationError
from .kernel import _cutoff
from .oracles import poisson_kernel
from .spectral import solve_regular, spectral_density

_ALIGN_TOL = 1e-8


# --------------------------------------------------------------------------
# Terrain and boundary data
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TerrainProfile:
    """Terrain height ``h(x)`` from a named family or from samples.

    Use the constructors :meth:`agnesi`, :meth:`bump`, :meth:`flat` and
    :meth:`from_samples`.
    """

    kind: str
    params: dict

    @classmethod
    def agnesi(cls, h0, b, center=0.0, half_width=None):
        """Witch of Agnesi ``h0 b^2 / ((x - c)^2 + b^2)``.

        With ``half_width`` the mountain is cut to ``|x - c| <= half_width``
        and lowered by its edge height, which gives compact support with a
        continuous height.
        """
        if not b > 0:
            raise InputValidationError("Agnesi width must be positive")
        if half_width is not None and not half_width > 0:
            raise InputValidationError("half_width must be positive")
        return cls("agnesi", dict(h0=float(h0), b=float(b), center=float(center),
                                  half_width=None if half_width is None else float(half_width)))

    @classmethod
    def bump(cls, h0, left, right):
        """Smooth bump ``h0 exp(1 - 1/(1 - t^2))`` on ``[left, right]``."""
        if not right > left:
            raise InputValidationError("bump support must have right > left")
        return cls("bump", dict(h0=float(h0), left=float(left), right=float(right)))

    @classmethod
    def flat(cls):
        return cls("flat", {})

    @classmethod
    def from_samples(cls, x, h):
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        if len(x) < 4 or np.any(np.diff(x) <= 0):
            raise InputValidationError("terrain samples need >= 4 increasing abscissae")
        return cls("samples", dict(x=x, h=h))

    def _spline(self):
        return CubicSpline(self.params["x"], self.params["h"], bc_type="natural")

    def height(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "flat":
            return np.zeros_like(x)
        if self.kind == "agnesi":
            d = x - p["center"]
            h = p["h0"] * p["b"] ** 2 / (d * d + p["b"] ** 2)
            if p["half_width"] is not None:
                edge = p["h0"] * p["b"] ** 2 / (p["half_width"] ** 2 + p["b"] ** 2)
                h = np.where(np.abs(d) <= p["half_width"], h - edge, 0.0)
            return h
        if self.kind == "bump":
            t = (2.0 * x - p["left"] - p["right"]) / (p["right"] - p["left"])
            inside = np.abs(t) < 1
            out = np.zeros_like(t)
            out[inside] = p["h0"] * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
            return out
        if self.kind == "samples":
            xs = p["x"]
            return np.where((x >= xs[0]) & (x <= xs[-1]), self._spline()(x), 0.0)
        raise InputValidationError(f"unknown terrain kind {self.kind!r}")

    def slope(self, x):
        """``dh/dx``, analytic for the named families."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "flat":
            return np.zeros_like(x)
        if self.kind == "agnesi":
            d = x - p["center"]
            b2 = p["b"] ** 2
            s = -2.0 * p["h0"] * b2 * d / (d * d + b2) ** 2
            if p["half_width"] is not None:
                s = np.where(np.abs(d) <= p["half_width"], s, 0.0)
            return s
        if self.kind == "bump":
            L = p["right"] - p["left"]
            t = (2.0 * x - p["left"] - p["right"]) / L
            inside = np.abs(t) < 1
            out = np.zeros_like(t)
            ti = t[inside]
            out[inside] = (p["h0"] * np.exp(1.0 - 1.0 / (1.0 - ti**2))
                           * (-2.0 * ti / (1.0 - ti**2) ** 2) * (2.0 / L))
            return out
        if self.kind == "samples":
            xs = p["x"]
            return np.where((x >= xs[0]) & (x <= xs[-1]), self._spline()(x, 1), 0.0)
        raise InputValidationError(f"unknown terrain kind {self.kind!r}")


def f_grid(dx, x_min, x_max):
    """Half-integer grid ``(k + 1/2) dx`` covering ``[x_min, x_max]``."""
    k_lo = int(math.floor(x_min / dx - 0.5 + 1e-9))
    k_hi = int(math.ceil(x_max / dx - 0.5 - 1e-9))
    return (np.arange(k_lo, k_hi + 1) + 0.5) * dx


def _trapezoid_weights(n, dx):
    w = np.full(n, dx)
    if n > 1:
        w[0] = w[-1] = 0.5 * dx
    return w


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Samples of ``f = u0(0) dh/dx`` on a uniform grid with trapezoid weights."""

    x: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or len(x) < 2:
            raise InputValidationError("boundary data need matching 1-D x and f (>= 2 points)")
        d = np.diff(x)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
            raise InputValidationError("boundary data must sit on a uniform increasing grid")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def weights(self):
        return _trapezoid_weights(len(self.x), self.dx)

    @property
    def mean(self):
        """``int f dx``."""
        return float(np.dot(self.weights, self.f))

    @property
    def first_moment(self):
        """``int x f dx``."""
        return float(np.dot(self.weights, self.x * self.f))

    @property
    def l1(self):
        return float(np.dot(self.weights, np.abs(self.f)))

    @property
    def linf(self):
        return float(np.max(np.abs(self.f)))

    def support(self):
        """Smallest and largest abscissa with ``f != 0`` (None if f vanishes)."""
        nz = np.flatnonzero(self.f)
        if len(nz) == 0:
            return None
        return float(self.x[nz[0]]), float(self.x[nz[-1]])

    def __add__(self, other):
        if not np.array_equal(self.x, other.x):
            raise InputValidationError("cannot add boundary data on different grids")
        return BoundaryData(self.x, self.f + other.f)

    def scaled(self, factor):
        return BoundaryData(self.x, factor * self.f)


def boundary_data(terrain, u0_surface, x, mean_tol=1e-6, edge_tol=1e-2):
    """Boundary datum ``f = u0(0) dh/dx`` sampled at ``x``.

    Parameters
    ----------
    terrain : TerrainProfile
    u0_surface : float
        Surface wind (non-dimensional).
    x : array_like
        Uniform grid, usually from :func:`f_grid`.
    mean_tol : float
        ``|int f| <= mean_tol * int |f|`` is required: f is the derivative of
        a height that vanishes at both ends.
    edge_tol : float
        A warning is issued when ``|h|`` at the grid edges exceeds
        ``edge_tol * max |h|``.

    Returns
    -------
    BoundaryData
    """
    if not u0_surface > 0:
        raise InputValidationError("surface wind must be positive")
    x = np.asarray(x, dtype=float)
    data = BoundaryData(x, u0_surface * terrain.slope(x))
    if data.l1 > 0 and abs(data.mean) > mean_tol * data.l1:
        raise InputValidationError(
            f"terrain does not decay at the grid edges: int f = {data.mean:.3e} "
            f"vs int |f| = {data.l1:.3e}")
    h = terrain.height(x)
    hmax = float(np.max(np.abs(h))) if len(h) else 0.0
    if hmax > 0 and max(abs(h[0]), abs(h[-1])) > edge_tol * hmax:
        warnings.warn("terrain height at the grid edges exceeds "
                      f"{edge_tol:g} of its maximum", RuntimeWarning, stacklevel=2)
    return data


def modal_amplitude(f, lam, F0, x, support=None):
    """Horizontal amplitude ``U(x, lam)`` solving ``U'' + (F0 - lam) U + f = 0``.

    For ``lam > F0`` the bounded solution
    ``int exp(-kappa |x - x'|) / (2 kappa) f(x') dx'``; for ``lam < F0`` the
    solution vanishing upstream of the support,
    ``-int_{-inf}^x sin(k (x - x')) / k f(x') dx'``.

    Parameters
    ----------
    f : BoundaryData or callable
        Samples (trapezoid rule) or a function (adaptive quadrature, requires
        ``support``).
    lam, F0 : float
    x : array_like
        Evaluation points.
    support : tuple, optional
        ``(a, b)`` outside of which a callable ``f`` vanishes.
    """
    if lam == F0:
        raise InputValidationError("lam = F0 is excluded")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    if lam > F0:
        kappa = math.sqrt(lam - F0)

        def kern(d):
            return np.exp(-kappa * np.abs(d)) / (2.0 * kappa)
    else:
        k = math.sqrt(F0 - lam)

        def kern(d):
            return np.where(d > 0, -np.sin(k * d) / k, 0.0)

    if isinstance(f, BoundaryData):
        w = f.weights * f.f
        for idx, xx in np.ndenumerate(x):
            out[idx] = float(np.dot(kern(xx - f.x), w))
        return out
    if support is None:
        raise InputValidationError("a callable f needs its support (a, b)")
    a, b = support
    for idx, xx in np.ndenumerate(x):
        hi = b if lam > F0 else min(b, xx)
        if hi <= a:
            continue
        pts = [xx] if a < xx < hi else None
        out[idx] = quad(lambda t: float(kern(xx - t)) * float(f(t)), a, hi, points=pts,
                        limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    return out


# --------------------------------------------------------------------------
# Field
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WaveField:
    """Normal-form field ``w`` and physical vertical velocity ``wbar = w / E``."""

    x: np.ndarray
    zeta: np.ndarray
    z: np.ndarray
    w: np.ndarray
    wbar: np.ndarray
    boundary: BoundaryData
    F0: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else float("nan")


def _segment_weights(d, dx, zeta, kind="poisson", n_gauss=16):
    """``W[p, j] = int_0^dx t^p k((d_j + 1/2) dx + t) dt`` for p = 0..3.

    ``k`` is ``K0(., zeta)`` (``kind='poisson'``) or the localised
    ``zeta log(u^2 + zeta^2) chi(u)`` (``kind='log'``, ``chi = 1`` on the
    central segment).  Segment ``d = -1`` straddles the evaluation point; for
    ``zeta < dx`` its moments come from symmetric closed forms.  Everywhere
    else the singularity sits at least ``dx / 2`` from the segment and
    Gauss-Legendre is exact to rounding.
    """
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    h = 0.5 * dx
    tn = h * (t + 1.0)
    u = (d + 0.5)[:, None] * dx + tn[None, :]
    if kind == "poisson":
        vals = poisson_kernel(u, zeta)
    else:
        vals = zeta * np.log(u * u + zeta * zeta) * _cutoff(u)
    vals = vals * (h * w)[None, :]
    W = np.stack([vals @ tn**p for p in range(4)])
    if zeta < dx and (kind == "poisson" or h <= 1.0):
        centre = np.flatnonzero(d == -1)
        if len(centre):
            at = math.atan(h / zeta)
            if kind == "poisson":
                m0 = 2.0 / math.pi * at
                m2 = 2.0 * zeta / math.pi * (h - zeta * at)
            else:
                lg = math.log(h * h + zeta * zeta)
                m0 = 2.0 * zeta * (h * lg - 2.0 * h + 2.0 * zeta * at)
                m2 = 2.0 * zeta * (h**3 / 3.0 * lg
                                   - 2.0 / 3.0 * (h**3 / 3.0 - zeta**2 * h + zeta**3 * at))
            # moments of t = u + h from the even moments in u
            W[:, centre[0]] = (m0, h * m0, m2 + h * h * m0, 3.0 * h * m2 + h**3 * m0)
    return W


def _product_lattice(f, k0, i, dx, zeta, kind="poisson"):
    """``k * S`` for the cubic spline ``S`` through ``f`` on ``(k0 + 1/2 + s) dx``.

    ``S`` vanishes outside the samples.  The evaluation points ``x = i dx``
    are a whole number of half-steps from every knot, so the per-segment
    weights depend only on ``d = s + k0 - i`` and the sum over segments is a
    set of discrete convolutions.
    """
    xf = (k0 + 0.5 + np.arange(len(f))) * dx
    spline = CubicSpline(xf, f)
    if zeta == 0:
        if kind != "poisson":
            return np.zeros(len(i))
        inside = (i * dx >= xf[0]) & (i * dx <= xf[-1])
        return np.where(inside, spline(i * dx), 0.0)
    coef = spline.c[::-1]
    n_seg = coef.shape[1]
    d = np.arange(k0 - int(i[-1]), k0 + n_seg - int(i[0]))
    if kind == "log":
        # the cutoff vanishes beyond |u| = 2
        near = np.flatnonzero(((d + 1.5) * dx > -2.0 - dx) & ((d + 0.5) * dx < 2.0 + dx))
        if len(near) == 0:
            return np.zeros(len(i))
        lo, hi = near[0], near[-1] + 1
    else:
        lo, hi = 0, len(d)
    W = _segment_weights(d[lo:hi], dx, zeta, kind)
    # out[i] = sum_s coef[s] W[s + i_last - i], a banded correlation
    full = sum(np.convolve(coef[p], W[p, ::-1]) for p in range(4))
    n = lo + (hi - lo) - 1 - (int(i[-1]) - i)
    ok = (n >= 0) & (n < len(full))
    return np.where(ok, full[np.clip(n, 0, len(full) - 1)], 0.0)


def _lattice_index(values, dx, offset, what):
    idx = np.rint(values / dx - offset)
    if np.any(np.abs(values / dx - offset - idx) > _ALIGN_TOL):
        raise InputValidationError(f"{what} is not aligned with the kernel lattice")
    return idx.astype(np.int64)


def solve(kernel, boundary, x=None):
    """Field ``w = K * f`` on the integer grid ``i dx``.

    Parameters
    ----------
    kernel : KernelField
    boundary : BoundaryData
        Samples on ``(k + 1/2) dx`` with the kernel's ``dx``.
    x : array_like, optional
        Field abscissae (multiples of ``dx``); defaults to every column the
        kernel lattice supports for this ``f``.

    Returns
    -------
    WaveField
    """
    dx = kernel.dx
    if abs(boundary.dx - dx) > 1e-9 * dx:
        raise InputValidationError("boundary data and kernel use different dx")
    k = _lattice_index(boundary.x, dx, 0.5, "boundary grid")
    k0, k1 = int(k[0]), int(k[-1])
    lat = kernel.lattice
    i_min, i_max = lat.m_lo + k1 + 1, lat.m_hi + k0
    if x is None:
        if i_max < i_min:
            raise InputValidationError("kernel lattice too narrow for this boundary data")
        i = np.arange(i_min, i_max + 1)
    else:
        i = _lattice_index(np.asarray(x, dtype=float), dx, 0.0, "field grid")
        if np.any(i < i_min) or np.any(i > i_max):
            raise InputValidationError(
                f"field window needs kernel columns beyond the lattice "
                f"(allowed x in [{i_min * dx:g}, {i_max * dx:g}])")
    xs = i * dx
    g = boundary.f * boundary.weights
    # the log-singular part of K - K0 is integrated like K0, the smooth rest
    # by the trapezoid rule
    reg = kernel.regular - kernel.log_part()
    log_scale = -kernel.F_ground / (4.0 * np.pi)
    pos = i - k0 - 1 - lat.m_lo
    w = np.empty((len(kernel.zeta), len(i)))
    for j, zeta in enumerate(kernel.zeta):
        w[j] = np.convolve(reg[j], g)[pos]
        w[j] += _product_lattice(boundary.f, k0, i, dx, float(zeta))
        if log_scale != 0.0:
            w[j] += log_scale * _product_lattice(boundary.f, k0, i, dx, float(zeta), "log")
    E = kernel.E if kernel.E is not None else np.ones(len(kernel.zeta))
    z = kernel.z if kernel.z is not None else kernel.zeta
    return WaveField(xs, kernel.zeta.copy(), np.asarray(z, float), w, w / E[:, None], boundary,
                     kernel.F0)


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------

def _pick_altitudes(v, n):
    a = np.abs(v)
    peaks = [j for j in range(len(a)) if (j == 0 or a[j] >= a[j - 1]) and (j == len(a) - 1 or a[j] >= a[j + 1])]
    order = sorted(peaks, key=lambda j: -a[j])
    chosen = order[:n]
    if len(chosen) < n:
        rest = [j for j in np.argsort(-a) if j not in chosen]
        chosen += rest[: n - len(chosen)]
    return sorted(chosen)


def radiation_diagnostic(field, spectral, window=(-60.0, -20.0), zetas=None, n_altitudes=3,
                         v_threshold=0.1, max_condition=1e8):
    """Windward behaviour of ``w_x`` against its predicted algebraic decay.

    Upstream of a compactly supported datum,
    ``w_x ~ (int f) g0 / x^2 + 2 (int x f) g0 / x^3``, ``g0 = v(zeta, F0) sigma(F0+)``.
    For each altitude the report gives the log-log decay exponent, a
    monotonicity flag (no sign change of ``w_x``), and the leading coefficient
    from a least-squares fit of ``c_p x^-p + c_{p+1} x^-(p+1) + c_{p+2} x^-(p+2)``
    (``p = 2``, or ``p = 3`` for mean-free data).

    Parameters
    ----------
    field : WaveField
    spectral : SpectralData
    window : (float, float)
        Upstream window ``[-X2, -X1]``.
    zetas : sequence of float, optional
        Rows to analyse; by default the ``n_altitudes`` largest local maxima
        of ``|v(zeta, F0)|`` with ``|v| >= v_threshold * max |v|``.

    Returns
    -------
    dict
    """
    lo, hi = window
    if not lo < hi < 0:
        raise InputValidationError("window must be an interval of negative x")
    supp = field.boundary.support()
    if supp is None:
        raise InputValidationError("boundary data vanish identically")
    if supp[0] <= hi:
        raise InputValidationError("boundary data must be supported to the right of the window")
    cols = (field.x >= lo) & (field.x <= hi)
    if np.count_nonzero(cols) < 8:
        raise InputValidationError("fewer than 8 field columns in the window")
    pot = spectral.potential
    F0 = pot.F0
    v = solve_regular(pot, F0, field.zeta).v
    sigma0 = spectral_density(pot, F0 * (1.0 + 1e-6))
    m0 = field.boundary.mean
    m1 = field.boundary.first_moment
    xw = field.x[cols]
    mid = 0.5 * (lo + hi)
    mean_free = abs(m0) * abs(mid) < 1e-3 * abs(2.0 * m1)
    p = 3 if mean_free else 2
    expected_factor = 2.0 * m1 if mean_free else m0

    if zetas is None:
        vmax = float(np.max(np.abs(v)))
        cand = np.flatnonzero(np.abs(v) >= v_threshold * vmax)
        rows = [int(cand[j]) for j in _pick_altitudes(v[cand], n_altitudes)]
    else:
        rows = [int(np.argmin(np.abs(field.zeta - zz))) for zz in zetas]

    x1 = float(np.min(np.abs(xw)))
    design = np.column_stack([(x1 / np.abs(xw)) ** n * np.sign(xw) ** n for n in (p, p + 1, p + 2)])
    cond = float(np.linalg.cond(design))
    if cond > max_condition:
        raise InputValidationError(f"window too small for a stable fit (condition number {cond:.2e})")
    wx = np.gradient(field.w, field.dx, axis=1)[:, cols]
    vmax = float(np.max(np.abs(v)))
    out = []
    for j in rows:
        d = wx[j]
        coef, *_ = np.linalg.lstsq(design, d, rcond=None)
        c_fit = coef[0] * x1**p
        g0 = v[j] * sigma0
        c_exp = expected_factor * g0
        slope = np.polyfit(np.log(np.abs(xw)), np.log(np.abs(d) + 1e-300), 1)[0]
        out.append(dict(zeta=float(field.zeta[j]), v=float(v[j]), exponent=float(-slope),
                        monotone=bool(np.all(d > 0) or np.all(d < 0)),
                        coefficient=float(c_fit), expected=float(c_exp),
                        relative_error=float(abs(c_fit - c_exp) / abs(c_exp)) if c_exp else math.inf,
                        flagged=bool(abs(v[j]) < v_threshold * vmax)))
    return dict(window=[float(lo), float(hi)], leading_power=p, mean=m0, first_moment=m1,
                sigma_F0=float(sigma0), condition=cond, altitudes=out)


def stability_report(field):
    """``sup |w|``, ``||f||_1``, ``||f||_inf`` and the implied constant
    ``C = (sup |w| - ||f||_inf) / ||f||_1`` (clipped at 0)."""
    sup_w = float(np.max(np.abs(field.w))) if field.w.size else 0.0
    l1, linf = field.boundary.l1, field.boundary.linf
    if not np.isfinite(sup_w):
        raise InputValidationError("field contains non-finite values")
    implied = max(0.0, sup_w - linf) / l1 if l1 > 0 else 0.0
    return dict(sup_w=sup_w, f_l1=l1, f_linf=linf, implied_C=implied)


def pde_residual(field, F):
    """Five-point residual of ``w_xx + w_zetazeta + F(zeta) w`` at interior nodes.

    Requires equispaced zeta rows.  ``F`` is a callable of zeta.

    Returns
    -------
    ndarray, shape (n_zeta - 2, n_x - 2)
    """
    zeta = field.zeta
    dz = np.diff(zeta)
    if np.ptp(dz) > 1e-9 * dz[0]:
        raise InputValidationError("the stencil needs equispaced zeta rows")
    h, k = field.dx, dz[0]
    w = field.w
    lap = ((w[1:-1, 2:] - 2 * w[1:-1, 1:-1] + w[1:-1, :-2]) / h**2
           + (w[2:, 1:-1] - 2 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / k**2)
    Fz = np.asarray(F(zeta[1:-1]), dtype=float)
    return lap + Fz[:, None] * w[1:-1, 1:-1]
