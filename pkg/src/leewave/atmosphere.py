"""Background atmospheres, Scorer coefficients and the Liouville normal form.

All quantities are non-dimensional. Lengths are measured in units of
``Scales.length`` (2 km by default), velocities in ``Scales.velocity``
(20 m/s), densities in ``Scales.density`` and temperatures so that the
ideal gas law reads ``p = rho * T``.  With these scales gravity becomes
``g = 9.81 * 2000 / 400 = 49.05`` and the gas-constant ratio ``mu = 0.287``.

The vertical-velocity perturbation obeys

    A w_zz + B w_z + w_xx + C w = 0,

and the substitutions ``zeta = int dz / sqrt(A)`` and ``chi = E w`` reduce it
to the normal form ``chi_xx + chi_zeta zeta + F chi = 0``.  This module
computes A, B, C, D, E, F from a tabulated profile in one of three regimes:

``full``
    exact compressible coefficients,
``classical``
    ``A = 1`` (drops terms of relative size ``u0**2 / T0``),
``boussinesq``
    additionally ``B = 0`` and ``E = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import AssumptionError, InputValidationError

REGIMES = ("full", "classical", "boussinesq")
REFINE = 8


@dataclass(frozen=True)
class Scales:
    """Dimensional reference scales used for non-dimensionalization."""

    length: float = 2000.0  # m
    velocity: float = 20.0  # m/s
    density: float = 1.0  # kg/m^3
    gas_constant: float = 287.0  # J/(kg K)
    gravity: float = 9.81  # m/s^2
    heat_capacity: float = 1000.0  # J/(kg K)

    @property
    def g(self) -> float:
        """Non-dimensional gravity ``g' L' / U'^2``."""
        return self.gravity * self.length / self.velocity**2

    @property
    def mu(self) -> float:
        """Ratio of the gas constant to the specific heat at constant pressure."""
        return self.gas_constant / self.heat_capacity

    @property
    def temperature(self) -> float:
        """Temperature unit ``U'^2 / r'`` in kelvin."""
        return self.velocity**2 / self.gas_constant

    @property
    def pressure(self) -> float:
        return self.density * self.velocity**2


DEFAULT_SCALES = Scales()


def _as_float_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputValidationError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InputValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class BackgroundProfile:
    """Non-dimensional background state on a vertical grid.

    Parameters
    ----------
    z : array_like
        Strictly increasing altitudes with ``z[0] == 0``.
    u0, T0 : array_like
        Horizontal wind (positive) and temperature (positive).
    rho0, p0 : array_like, optional
        Density and pressure.  Filled in by :func:`hydrostatic_complete`
        when absent.
    g, mu : float
        Non-dimensional gravity and gas-constant ratio.
    """

    z: np.ndarray
    u0: np.ndarray
    T0: np.ndarray
    rho0: np.ndarray | None = None
    p0: np.ndarray | None = None
    g: float = DEFAULT_SCALES.g
    mu: float = DEFAULT_SCALES.mu

    def __post_init__(self):
        z = _as_float_array(self.z, "z")
        u0 = _as_float_array(self.u0, "u0")
        T0 = _as_float_array(self.T0, "T0")
        if len(z) < 4:
            raise InputValidationError("a profile needs at least 4 nodes")
        if len(u0) != len(z) or len(T0) != len(z):
            raise InputValidationError("profile columns have different lengths")
        if np.any(np.diff(z) <= 0):
            raise InputValidationError("altitudes must be strictly increasing")
        if z[0] != 0.0:
            raise InputValidationError("the lowest altitude must be 0")
        if np.any(u0 <= 0):
            raise InputValidationError("wind must be strictly positive (no flow reversal)")
        if np.any(T0 <= 0):
            raise InputValidationError("temperature must be strictly positive")
        if not (self.g > 0 and 0 < self.mu < 1):
            raise InputValidationError("need g > 0 and 0 < mu < 1")
        if np.any(1.0 - (1.0 - self.mu) * u0**2 / T0 <= 0):
            raise InputValidationError("1 - (1-mu) u0^2/T0 must stay positive")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "T0", T0)
        for name in ("rho0", "p0"):
            val = getattr(self, name)
            if val is not None:
                val = _as_float_array(val, name)
                if len(val) != len(z):
                    raise InputValidationError(f"{name} has the wrong length")
                if np.any(val <= 0):
                    raise InputValidationError(f"{name} must be strictly positive")
                object.__setattr__(self, name, val)

    @property
    def is_complete(self) -> bool:
        return self.rho0 is not None and self.p0 is not None


_ALIASES = {
    "altitude": ("altitude", "z", "height"),
    "wind": ("wind", "u", "u0"),
    "temperature": ("temperature", "t", "t0"),
    "density": ("density", "rho", "rho0"),
    "pressure": ("pressure", "p", "p0"),
}


def _column(records, key, required=True):
    lowered = {str(k).strip().lower(): k for k in records}
    for alias in _ALIASES[key]:
        if alias in lowered:
            return _as_float_array(records[lowered[alias]], key)
    if required:
        raise InputValidationError(f"missing column '{key}'")
    return None


def load_profile(source, units_mode="dimensional", scales=DEFAULT_SCALES):
    """Build a :class:`BackgroundProfile` from tabulated records.

    Parameters
    ----------
    source : mapping or path
        Column name to values (``altitude``, ``wind``, ``temperature`` and
        optionally ``density``, ``pressure``), or a path to a delimited
        text file with such a header.
    units_mode : {'dimensional', 'nondimensional'}
        Dimensional input is in SI units (m, m/s, K, kg/m^3, Pa).
    scales : Scales
        Reference scales.

    Returns
    -------
    BackgroundProfile
        Records sorted by altitude, shifted so that the lowest one sits at 0.
    """
    if not isinstance(source, Mapping):
        from .io import read_table

        source = read_table(source)
    if units_mode not in ("dimensional", "nondimensional"):
        raise InputValidationError(f"unknown units_mode {units_mode!r}")
    z = _column(source, "altitude")
    u = _column(source, "wind")
    T = _column(source, "temperature")
    rho = _column(source, "density", required=False)
    p = _column(source, "pressure", required=False)
    if len(z) < 4:
        raise InputValidationError("a profile needs at least 4 nodes")
    order = np.argsort(z, kind="stable")
    z, u, T = z[order], u[order], T[order]
    rho = None if rho is None else rho[order]
    p = None if p is None else p[order]
    if np.any(np.diff(z) <= 0):
        raise InputValidationError("altitudes must be distinct")
    if units_mode == "dimensional":
        z = z / scales.length
        u = u / scales.velocity
        T = T / scales.temperature
        rho = None if rho is None else rho / scales.density
        p = None if p is None else p / scales.pressure
    z = z - z[0]
    return BackgroundProfile(z, u, T, rho, p, g=scales.g, mu=scales.mu)


def _refined(z, factor=REFINE):
    """Grid with ``factor`` equal sub-intervals per original interval."""
    t = np.linspace(0.0, 1.0, factor + 1)[:-1]
    fine = (z[:-1, None] + np.diff(z)[:, None] * t[None, :]).ravel()
    return np.append(fine, z[-1])


def _spline(z, values, bc="natural"):
    return CubicSpline(z, values, bc_type=bc)


def hydrostatic_complete(profile, p0_surface=None, spline_bc="natural"):
    """Fill pressure and density from hydrostatic balance.

    Integrates ``p0' = -g p0 / T0`` by the composite trapezoid rule on a
    spline-refined grid, then sets ``rho0 = p0 / T0``.

    Parameters
    ----------
    profile : BackgroundProfile
    p0_surface : float, optional
        Surface pressure.  Defaults to ``rho0(0) T0(0)`` with ``rho0(0)``
        taken from the profile when present and 1 (the density scale)
        otherwise.

    Returns
    -------
    BackgroundProfile
    """
    if p0_surface is None:
        rho_s = profile.rho0[0] if profile.rho0 is not None else 1.0
        p0_surface = rho_s * profile.T0[0]
    if not p0_surface > 0:
        raise InputValidationError("surface pressure must be positive")
    z = profile.z
    zf = _refined(z)
    Tf = _spline(z, profile.T0, spline_bc)(zf)
    if np.any(Tf <= 0):
        raise InputValidationError("interpolated temperature is not positive")
    integral = cumulative_trapezoid(profile.g / Tf, zf, initial=0.0)[::REFINE]
    p0 = p0_surface * np.exp(-integral)
    rho0 = p0 / profile.T0
    return replace(profile, rho0=rho0, p0=p0)


def scorer_coefficients(u, u1, u2, T, T1, T2, g, mu, regime="full"):
    """Pointwise Scorer coefficients from wind, temperature and derivatives.

    Density enters only through ``rho'/rho = -(g + T')/T`` and
    ``rho/p = 1/T``, which follow from hydrostatic balance and the gas law.

    Returns
    -------
    dict
        Arrays ``A, dA, ddA, B, C, D, F, beta`` and ``log_E_rate``, the
        z-derivative of ``log E``.
    """
    if regime not in REGIMES:
        raise InputValidationError(f"unknown regime {regime!r}")
    u, u1, u2, T, T1, T2 = np.broadcast_arrays(*(np.asarray(a, float) for a in (u, u1, u2, T, T1, T2)))
    beta = (mu * g + T1) / T
    R1 = -(g + T1) / T  # rho'/rho
    R2 = -T2 / T + (g + T1) * (g + 2.0 * T1) / T**2  # rho''/rho
    zero = np.zeros_like(u)
    one = np.ones_like(u)

    if regime == "boussinesq":
        F = -u2 / u + g * beta / u**2
        return dict(A=one, dA=zero, ddA=zero, B=zero, C=F, D=zero, F=F, beta=beta,
                    log_E_rate=zero)

    if regime == "classical":
        C = -R1 * u1 / u - u2 / u + g * beta / u**2
        F = C - R1**2 / 4.0 - (R2 - R1**2) / 2.0
        return dict(A=one, dA=zero, ddA=zero, B=R1, C=C, D=R1, F=F, beta=beta,
                    log_E_rate=R1 / 2.0)

    m = 1.0 - mu
    s = 1.0 / T  # rho / p
    eps = m * u**2 * s
    eps1 = m * (2 * u * u1 / T - u**2 * T1 / T**2)
    eps2 = m * (2 * u1**2 / T + 2 * u * u2 / T - 4 * u * u1 * T1 / T**2
                - u**2 * T2 / T**2 + 2 * u**2 * T1**2 / T**3)
    A = 1.0 / (1.0 - eps)
    dA = A**2 * eps1
    ddA = 2 * A**3 * eps1**2 + A**2 * eps2
    B = A**2 * (R1 + 2 * m * s * u * u1 + g * m * s**2 * u**2)
    C = -A**2 * (R1 * u1 / u + u2 / u + g * R1 / u**2 + 2 * m * s * u1**2
                 - m * s * u * u2 + 2 * g * m * s * u1 / u + g**2 * m * s / u**2
                 + g * m * s**2 * u * u1 + g**2 * mu * m * s**2)
    D = (B - dA / 2.0) / np.sqrt(A)

    # Expansion of A^-3 F in (u, rho, p), written with p = 1, rho = 1/T.
    r, r1, r2 = s, R1 * s, R2 * s
    p = 1.0
    G = (-r1 * u1 / (r * u) - u2 / u - g * r1 / (r * u**2) + r1**2 / (4 * r**2) - r2 / (2 * r)
         - m * r1**2 * u**2 / (p * r) + 3 * m * r2 * u**2 / (4 * p) - m * r1 * u * u1 / p
         - 5 * m * r * u1**2 / (2 * p) + 3 * m * r * u * u2 / (2 * p) + g * m * r1 / p
         - 2 * g * m * r * u1 / (p * u) - g**2 * m * r / (p * u**2)
         + 5 * m**2 * r1**2 * u**4 / (16 * p**2) - m**2 * r * r2 * u**4 / (4 * p**2)
         + m**2 * r * r1 * u**3 * u1 / (4 * p**2) + 3 * m**2 * r**2 * u**2 * u1**2 / (4 * p**2)
         - m**2 * r**2 * u**3 * u2 / (2 * p**2) - 5 * g * m * r * r1 * u**2 / (4 * p**2)
         - 2 * g * mu * m * r**2 * u * u1 / p**2 + g**2 * (1 - 3 * mu + 2 * mu**2) * r**2 / p**2
         + 3 * g * m**2 * r**2 * r1 * u**4 / (8 * p**3) + g * m**2 * r**3 * u**3 * u1 / (4 * p**3)
         + g**2 * m * (-0.5 + mu - mu**2) * r**3 * u**2 / p**3
         + g**2 * m**2 * r**4 * u**4 / (16 * p**4))
    F = A**3 * G
    return dict(A=A, dA=dA, ddA=ddA, B=B, C=C, D=D, F=F, beta=beta,
                log_E_rate=(B - dA / 2.0) / (2.0 * A))


@dataclass(frozen=True, eq=False)
class ScorerData:
    """Scorer coefficients on the profile grid and the normal-form map.

    ``zeta`` holds the normal-form coordinate of each z node once
    :func:`liouville_map` has run; ``zeta_uniform`` and ``F_uniform`` hold F
    resampled on an equispaced zeta grid.  ``F0`` and ``F_star`` are set by
    :func:`with_asymptotics`.
    """

    z: np.ndarray
    u0: np.ndarray
    T0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    beta: np.ndarray
    regime: str
    g: float
    mu: float
    zeta: np.ndarray | None = None
    zeta_uniform: np.ndarray | None = None
    F_uniform: np.ndarray | None = None
    F0: float | None = None
    F_star: float | None = None
    validation: dict = field(default_factory=dict)

    @property
    def u0_surface(self) -> float:
        return float(self.u0[0])

    def _require_map(self):
        if self.zeta is None:
            raise InputValidationError("run liouville_map first")

    def z_of_zeta(self, zeta):
        """Altitude for given normal-form coordinates (monotone inversion)."""
        self._require_map()
        return PchipInterpolator(self.zeta, self.z, extrapolate=False)(zeta)

    def zeta_of_z(self, z):
        self._require_map()
        return PchipInterpolator(self.z, self.zeta, extrapolate=False)(z)

    def E_of_zeta(self, zeta):
        """Normal-form factor E at normal-form coordinates."""
        self._require_map()
        return np.exp(PchipInterpolator(self.zeta, np.log(self.E), extrapolate=False)(zeta))


def compute_scorer(profile, regime="full", spline_bc="natural"):
    """Scorer coefficients A, B, C, D, E, F of a background profile.

    Derivatives of the tabulated wind and temperature come from cubic
    splines (natural end conditions unless ``spline_bc`` says otherwise).
    ``E`` is integrated by the trapezoid rule on the spline-refined grid.

    Parameters
    ----------
    profile : BackgroundProfile
        Completed automatically if pressure or density is missing.
    regime : {'full', 'classical', 'boussinesq'}

    Returns
    -------
    ScorerData
        Without the normal-form map; see :func:`liouville_map`.
    """
    if regime not in REGIMES:
        raise InputValidationError(f"unknown regime {regime!r}")
    if not profile.is_complete:
        profile = hydrostatic_complete(profile, spline_bc=spline_bc)
    else:
        mismatch = np.max(np.abs(profile.p0 - profile.rho0 * profile.T0) / profile.p0)
        if mismatch > 1e-3:
            warnings.warn(f"supplied p0 and rho0*T0 differ by up to {mismatch:.2e} (relative); "
                          "derived coefficients use the hydrostatic relations", stacklevel=2)
    z = profile.z
    su = _spline(z, profile.u0, spline_bc)
    sT = _spline(z, profile.T0, spline_bc)

    def at(points):
        u, T = su(points), sT(points)
        if np.any(u <= 0) or np.any(T <= 0):
            raise InputValidationError("spline interpolant of wind or temperature leaves the positive range")
        return scorer_coefficients(u, su(points, 1), su(points, 2), T, sT(points, 1), sT(points, 2),
                                   profile.g, profile.mu, regime)

    nodes = at(z)
    zf = _refined(z)
    fine = at(zf)
    if np.any(~np.isfinite(nodes["F"])):
        raise InputValidationError("derivative estimation produced non-finite coefficients")
    if np.any(fine["A"] <= 0):
        raise InputValidationError("1 - (1-mu) u0^2/T0 vanishes between nodes")
    log_E = cumulative_trapezoid(fine["log_E_rate"], zf, initial=0.0)[::REFINE]
    return ScorerData(z=z, u0=profile.u0, T0=profile.T0, A=nodes["A"], B=nodes["B"], C=nodes["C"],
                      D=nodes["D"], E=np.exp(log_E), F=nodes["F"], beta=nodes["beta"],
                      regime=regime, g=profile.g, mu=profile.mu)


def liouville_map(scorer, n_uniform=None):
    """Populate the normal-form coordinate ``zeta = int_0^z dz' / sqrt(A)``.

    The integral uses the trapezoid rule on a spline-refined grid; F is then
    resampled onto ``n_uniform`` equispaced zeta points (default: as many as
    z nodes, at least 16).
    """
    if np.any(scorer.A <= 0):
        raise InputValidationError("A must be positive for the normal-form map")
    z = scorer.z
    zf = _refined(z)
    Af = _spline(z, scorer.A)(zf)
    if np.any(Af <= 0):
        raise InputValidationError("interpolated A is not positive")
    zeta = cumulative_trapezoid(1.0 / np.sqrt(Af), zf, initial=0.0)[::REFINE]
    n = max(16, len(z)) if n_uniform is None else int(n_uniform)
    zeta_u = np.linspace(0.0, zeta[-1], n)
    F_u = _spline(zeta, scorer.F)(zeta_u)
    return replace(scorer, zeta=zeta, zeta_uniform=zeta_u, F_uniform=F_u)


@dataclass(frozen=True)
class AsymptoticEstimate:
    """Asymptotic Scorer constant, supremum and finite-grid moment proxies.

    Unpacks as ``F0, F_star = estimate``.
    """

    F0: float
    F_star: float
    l1: float
    first_moment: float
    tail_fraction: float

    def __iter__(self):
        return iter((self.F0, self.F_star))

    def as_dict(self):
        return dict(F0=self.F0, F_star=self.F_star, int_abs_F_minus_F0=self.l1,
                    int_zeta_abs_F_minus_F0=self.first_moment, tail_fraction=self.tail_fraction)


def estimate_F0_Fstar(scorer, tail_fraction=0.2):
    """Estimate ``F0`` (mean of F over the top of the grid) and ``F_star``.

    Parameters
    ----------
    scorer : ScorerData
        Mapped to zeta first if necessary.
    tail_fraction : float in (0, 1)
        Fraction of the uniform zeta grid, counted from the top, averaged
        to obtain ``F0``.

    Returns
    -------
    AsymptoticEstimate

    Raises
    ------
    AssumptionError
        If ``F0 <= 0``: no positive asymptotic Scorer constant exists.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise InputValidationError("tail_fraction must lie in (0, 1)")
    if scorer.zeta_uniform is None:
        scorer = liouville_map(scorer)
    zeta, F = scorer.zeta_uniform, scorer.F_uniform
    n_tail = max(1, int(math.ceil(tail_fraction * len(F))))
    F0 = float(np.mean(F[-n_tail:]))
    F_star = float(np.max(F))
    if not F0 > 0:
        raise AssumptionError(f"asymptotic Scorer constant F0 = {F0:.6g} is not positive")
    dev = np.abs(F - F0)
    return AsymptoticEstimate(F0=F0, F_star=F_star, l1=float(np.trapezoid(dev, zeta)),
                              first_moment=float(np.trapezoid(zeta * dev, zeta)),
                              tail_fraction=tail_fraction)


def with_asymptotics(scorer, tail_fraction=0.2):
    """Return ``scorer`` mapped to zeta with ``F0``, ``F_star`` and the report attached."""
    if scorer.zeta_uniform is None:
        scorer = liouville_map(scorer)
    est = estimate_F0_Fstar(scorer, tail_fraction)
    return replace(scorer, F0=est.F0, F_star=est.F_star, validation=est.as_dict())


def sample_profile_path():
    """Path of the bundled CIRA-like sample profile (dimensional CSV)."""
    from importlib.resources import files

    return files("leewave") / "data" / "cira_like_profile.csv"
