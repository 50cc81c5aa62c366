"""Green's kernel ``K = K^e + K^r + K^t`` on a staggered (x, zeta) lattice.

``K^e`` (evanescent, ``lambda > F0``) contains the Poisson singularity
``K0 = zeta / (pi (x^2 + zeta^2))``.  Only ``K^e - K0`` is computed
numerically, from

    K^e - K0 = int_0^inf exp(-mu |x|) [v(zeta, F0 + mu^2) sigma(F0 + mu^2) - sin(mu zeta)/pi] dmu,

which is bounded.  ``K^r`` (``0 < lambda < F0``) uses ``lambda = F0 sin^2 theta``
to remove both endpoint singularities.  ``K^t`` sums the trapped modes.  Both
vanish for ``x <= 0``.

The x lattice is ``x_m = (m + 1/2) dx``, which never contains ``x = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1

from .errors import InputValidationError
from .oracles import poisson_kernel

PIECES = ("evanescent", "radiated", "trapped")
EXP_CUTOFF = 60.0


@dataclass(frozen=True)
class Lattice:
    """Staggered lattice ``x_m = (m + 1/2) dx`` for ``m_lo <= m < m_hi``."""

    dx: float
    m_lo: int
    m_hi: int

    def __post_init__(self):
        if not self.dx > 0 or self.m_hi <= self.m_lo:
            raise InputValidationError("lattice needs dx > 0 and at least one column")

    @property
    def x(self):
        return (np.arange(self.m_lo, self.m_hi) + 0.5) * self.dx

    def __len__(self):
        return self.m_hi - self.m_lo

    @classmethod
    def covering(cls, dx, x_min, x_max):
        """Smallest lattice whose columns cover ``[x_min, x_max]``."""
        m_lo = int(math.floor(x_min / dx - 0.5 + 1e-9))
        m_hi = int(math.ceil(x_max / dx - 0.5 - 1e-9)) + 1
        return cls(float(dx), m_lo, m_hi)


@dataclass(frozen=True)
class MuQuadrature:
    """Gauss-Legendre panels in ``mu`` on ``[0, mu_max]``.

    Panel edges grow geometrically, ``e_{n+1} = e_n + min(panel_width,
    growth * e_n)``, starting from ``first``.  Columns with ``|x| mu < 60`` are
    the only ones that see a panel, so each panel spans at most
    ``60 * growth`` e-folds of ``exp(-mu |x|)``; ``panel_width`` bounds the
    phase of ``cos(mu zeta)`` per panel.
    """

    nodes: np.ndarray
    weights: np.ndarray
    panel_width: float
    mu_max: float

    @classmethod
    def build(cls, mu_max, panel_width, nodes_per_panel=16, first=None, growth=0.25):
        if not (mu_max > 0 and panel_width > 0):
            raise InputValidationError("mu_max and panel_width must be positive")
        if first is None:
            first = panel_width / 4096.0
        first = min(first, panel_width, mu_max)
        edges = [0.0, first]
        while edges[-1] < mu_max:
            edges.append(min(mu_max, edges[-1] + min(panel_width, growth * edges[-1])))
        edges = np.asarray(edges)
        t, w = np.polynomial.legendre.leggauss(nodes_per_panel)
        half = 0.5 * np.diff(edges)
        centre = 0.5 * (edges[:-1] + edges[1:])
        nodes = (centre[:, None] + half[:, None] * t[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return cls(nodes, weights, float(panel_width), float(mu_max))


def _cutoff(x):
    """Smooth cutoff: 1 for ``|x| <= 1``, 0 for ``|x| >= 2``."""
    ax = np.abs(np.asarray(x, dtype=float))

    def psi(t):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)

    a, b = psi(2.0 - ax), psi(ax - 1.0)
    return a / (a + b)


def log_kernel(x, zeta, F_ground):
    """Localised singular part of ``K - K0``.

    ``-F(0) zeta log(x^2 + zeta^2) chi(x) / (4 pi)`` comes from the
    ``r^2 log r`` term of the fundamental solution of ``Delta + F``; the
    smooth cutoff ``chi`` (1 for ``|x| <= 1``, 0 beyond 2) keeps it local so
    that splitting it off never touches the far field.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -F_ground / (4.0 * np.pi) * zeta * np.log(x * x + zeta * zeta) * _cutoff(x)
    return np.where(zeta == 0, 0.0, out)


def _check_grid(x, zeta):
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(x == 0):
        raise InputValidationError("the x grid must exclude 0")
    if np.any(zeta < 0):
        raise InputValidationError("zeta must be non-negative")
    return x, zeta


def _integrated_q(potential, zeta):
    """``int_0^zeta q`` by the trapezoid rule on a fine grid."""
    top = float(np.max(zeta)) if len(zeta) else 0.0
    zm = min(potential.zeta_max, top)
    if zm <= 0:
        return np.zeros_like(zeta)
    grid = np.linspace(0.0, zm, 20001)
    qg = potential.q_func(grid)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (qg[1:] + qg[:-1]) * np.diff(grid))))
    return np.interp(np.minimum(zeta, zm), grid, cum)


def default_mu_max(x):
    return 50.0 / min(float(np.min(np.abs(x))), 1.0)


def default_panel_width(zeta):
    top = float(np.max(zeta)) if len(zeta) else 1.0
    return min(4.0, 8.0 / max(top, 1e-12))


def assemble_evanescent(spectral, x, zeta, mu_max=None, panel_width=None, nodes_per_panel=16):
    """Regular evanescent part ``K^e - K0`` on the grid.

    Parameters
    ----------
    spectral : SpectralData
    x, zeta : array_like
        Grid columns (non-zero) and rows.
    mu_max : float, optional
        Truncation of the mu integral, default ``50 / min(|x|, 1)``.  The
        ``cos(mu zeta) G(zeta) / (2 pi mu)`` bracket tail beyond it is added
        in closed form via the exponential integral, with
        ``G = F0 zeta - int_0^zeta q``.
    panel_width : float, optional
        Largest Gauss panel, default ``min(4, 8 / max zeta)``.

    Returns
    -------
    values : ndarray, shape (len(zeta), len(x))
    report : dict
        Quadrature sizes and the magnitude of the tail correction.
    """
    x, zeta = _check_grid(x, zeta)
    if mu_max is None:
        mu_max = default_mu_max(x)
    if panel_width is None:
        panel_width = default_panel_width(zeta)
    rule = MuQuadrature.build(mu_max, panel_width, nodes_per_panel,
                              first=min(panel_width / 4096.0, 0.1 / float(np.max(np.abs(x)))))
    mu = rule.nodes
    F0 = spectral.F0
    v, sigma = spectral.table(F0 + mu * mu, zeta)
    bracket = v * sigma[None, :] - np.sin(np.outer(zeta, mu)) / np.pi
    bracket *= rule.weights[None, :]

    ax = np.abs(x)
    out = np.zeros((len(zeta), len(x)))
    block = 512
    for start in range(0, len(mu), block):
        mb = mu[start:start + block]
        active = ax * mb[0] < EXP_CUTOFF
        if not np.any(active):
            break
        decay = np.exp(-np.outer(mb, ax[active]))
        out[:, active] += bracket[:, start:start + block] @ decay

    G = F0 * zeta - _integrated_q(spectral.potential, zeta)
    arg = mu_max * (ax[None, :] - 1j * zeta[:, None])
    tail = G[:, None] / (2.0 * np.pi) * exp1(arg).real
    out += tail
    report = dict(mu_max=float(mu_max), panel_width=float(panel_width), n_mu=int(len(mu)),
                  nodes_per_panel=int(nodes_per_panel), tail_max=float(np.max(np.abs(tail), initial=0.0)))
    return out, report


def assemble_radiated(spectral, x, zeta, n_theta=512):
    """Radiated piece ``K^r``; zero for ``x <= 0``.

    ``K^r = -int_0^F0 sin(sqrt(F0-lam) x)/sqrt(F0-lam) v sigma dlam`` with
    ``lam = F0 sin^2(theta)``, i.e.
    ``-int_0^{pi/2} 2 sqrt(F0) sin(theta) sin(sqrt(F0) cos(theta) x) v sigma dtheta``.
    """
    x, zeta = _check_grid(x, zeta)
    out = np.zeros((len(zeta), len(x)))
    F0 = spectral.F0
    pos = x > 0
    if F0 <= 0 or not np.any(pos):
        return out, dict(n_theta=int(n_theta))
    t, w = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.25 * np.pi * (t + 1.0)
    wt = 0.25 * np.pi * w
    lam = F0 * np.sin(theta) ** 2
    v, sigma = spectral.table(lam, zeta)
    r = math.sqrt(F0)
    weight = wt * 2.0 * r * np.sin(theta) * sigma
    out[:, pos] = -(v * weight[None, :]) @ np.sin(np.outer(r * np.cos(theta), x[pos]))
    return out, dict(n_theta=int(n_theta))


def assemble_trapped(spectral, x, zeta):
    """Trapped piece ``K^t = -sum_j sin(k_j x)/k_j v_j(zeta)/||v_j||^2`` for ``x > 0``."""
    x, zeta = _check_grid(x, zeta)
    out = np.zeros((len(zeta), len(x)))
    pos = x > 0
    for state in spectral.bound_states:
        k = state.frequency
        prof = state.values(zeta) / state.norm2
        out[:, pos] -= np.outer(prof, np.sin(k * x[pos]) / k)
    return out, dict(n_bound=len(spectral.bound_states),
                     eigenvalues=[b.lam for b in spectral.bound_states])


@dataclass(frozen=True, eq=False)
class KernelField:
    """Kernel pieces on a staggered lattice.

    ``ke`` holds ``K^e - K0``; the full kernel is ``regular + K0``.
    ``F_ground`` is ``F(0)``, which fixes the leading singular term of the
    regular part (see :func:`log_kernel`).
    ``E``, ``z`` and ``u0_surface`` carry the normal-form data needed to turn
    a field back into physical vertical velocity.
    """

    lattice: Lattice
    zeta: np.ndarray
    ke: np.ndarray
    kr: np.ndarray
    kt: np.ndarray
    F0: float
    F_star: float
    E: np.ndarray | None = None
    z: np.ndarray | None = None
    u0_surface: float = 1.0
    meta: dict = field(default_factory=dict)
    F_ground: float = 0.0

    @property
    def x(self):
        return self.lattice.x

    @property
    def dx(self):
        return self.lattice.dx

    @property
    def regular(self):
        """``K - K0``."""
        return self.ke + self.kr + self.kt

    def poisson(self):
        X, Z = np.meshgrid(self.x, self.zeta)
        return poisson_kernel(X, Z)

    def total(self):
        """Full kernel ``K``."""
        return self.regular + self.poisson()

    def log_part(self):
        """Leading singular term of ``K - K0`` on the lattice."""
        X, Z = np.meshgrid(self.x, self.zeta)
        return log_kernel(X, Z, self.F_ground)

    def evanescent(self):
        """Full evanescent piece ``K^e``."""
        return self.ke + self.poisson()


def kernel_field(spectral, lattice, zeta, mu_max=None, panel_width=None, nodes_per_panel=16,
                 n_theta=512, pieces=PIECES, E=None, z=None, u0_surface=1.0):
    """Assemble a :class:`KernelField`.

    Parameters
    ----------
    spectral : SpectralData
    lattice : Lattice
    zeta : array_like
        Altitude rows (``>= 0``).
    mu_max, panel_width, nodes_per_panel, n_theta
        Quadrature controls; see :func:`assemble_evanescent` and
        :func:`assemble_radiated`.
    pieces : sequence of str
        Subset of ``('evanescent', 'radiated', 'trapped')`` to compute; the
        others are stored as zeros.
    E, z : array_like, optional
        Normal-form factor and physical altitude at each row (default 1 and
        ``zeta``).
    """
    zeta = np.asarray(zeta, dtype=float)
    unknown = set(pieces) - set(PIECES)
    if unknown:
        raise InputValidationError(f"unknown kernel pieces {sorted(unknown)}")
    x = lattice.x
    shape = (len(zeta), len(x))
    meta = dict(pieces=list(pieces))
    ke = kr = kt = None
    if "evanescent" in pieces:
        ke, rep = assemble_evanescent(spectral, x, zeta, mu_max, panel_width, nodes_per_panel)
        meta.update(rep)
    if "radiated" in pieces:
        kr, rep = assemble_radiated(spectral, x, zeta, n_theta)
        meta.update(rep)
    if "trapped" in pieces:
        kt, rep = assemble_trapped(spectral, x, zeta)
        meta.update(rep)
    zeros = np.zeros(shape)
    E = np.ones(len(zeta)) if E is None else np.asarray(E, dtype=float)
    z = zeta.copy() if z is None else np.asarray(z, dtype=float)
    return KernelField(lattice, zeta, zeros if ke is None else ke, zeros if kr is None else kr,
                       zeros if kt is None else kt, spectral.F0, spectral.F_star, E, z,
                       float(u0_surface), meta, float(spectral.potential.F(0.0)))
