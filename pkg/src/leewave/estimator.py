"""scikit-learn style front end.

:class:`LeeWaveSolver` is fitted to an atmosphere (profile, Scorer data, a
potential or precomputed spectral data) and then maps boundary data ``f``
sampled on :attr:`LeeWaveSolver.f_grid_` to vertical-velocity fields.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .atmosphere import BackgroundProfile, ScorerData, compute_scorer, with_asymptotics
from .errors import InputValidationError
from .field import BoundaryData, boundary_data, f_grid, solve
from .kernel import PIECES, Lattice, kernel_field
from .spectral import Potential, SpectralData, spectral_data


class LeeWaveSolver(TransformerMixin, BaseEstimator):
    """Green's-kernel solver for the normal-form lee-wave problem.

    Parameters
    ----------
    dx : float
        Horizontal spacing of the kernel lattice, the boundary grid and the field.
    f_range : (float, float)
        Interval holding the boundary data.
    x_range : (float, float)
        Field window.
    zeta : array_like, optional
        Field rows; default ``0.1, 0.2, ..., 5``.
    regime : {'full', 'classical', 'boussinesq'}
        Used when fitting to a :class:`BackgroundProfile`.
    tail_fraction : float
        Fraction of the top of the profile averaged for ``F0``.
    zeta_max : float, optional
        Truncation altitude of the potential built from Scorer data.
    mu_max, panel_width, nodes_per_panel, n_theta : optional
        Kernel quadrature controls (see :func:`leewave.kernel.kernel_field`).
    pieces : tuple of str
        Kernel pieces to include.

    Attributes
    ----------
    spectral_ : SpectralData
    kernel_ : KernelField
    f_grid_ : ndarray
        Abscissae at which ``transform`` expects ``f``.
    x_, zeta_ : ndarray
        Field grid.
    u0_surface_ : float
        Surface wind used by :meth:`boundary`.
    """

    def __init__(self, dx=0.1, f_range=(-10.0, 10.0), x_range=(-20.0, 20.0), zeta=None,
                 regime="full", tail_fraction=0.2, zeta_max=None, mu_max=None, panel_width=None,
                 nodes_per_panel=16, n_theta=512, pieces=PIECES):
        self.dx = dx
        self.f_range = f_range
        self.x_range = x_range
        self.zeta = zeta
        self.regime = regime
        self.tail_fraction = tail_fraction
        self.zeta_max = zeta_max
        self.mu_max = mu_max
        self.panel_width = panel_width
        self.nodes_per_panel = nodes_per_panel
        self.n_theta = n_theta
        self.pieces = pieces

    def _spectral(self, X):
        scorer = None
        if isinstance(X, BackgroundProfile):
            X = compute_scorer(X, self.regime)
        if isinstance(X, ScorerData):
            scorer = X if X.F0 is not None else with_asymptotics(X, self.tail_fraction)
            X = Potential.from_scorer(scorer, self.zeta_max)
        if isinstance(X, Potential):
            X = spectral_data(X)
        if not isinstance(X, SpectralData):
            raise InputValidationError(
                "fit expects a BackgroundProfile, ScorerData, Potential or SpectralData")
        return X, scorer

    def fit(self, X, y=None):
        """Compute spectral data and the kernel on the lattice the grids need."""
        if not self.dx > 0:
            raise InputValidationError("dx must be positive")
        spectral, scorer = self._spectral(X)
        dx = float(self.dx)
        fx = f_grid(dx, *self.f_range)
        k = np.rint(fx / dx - 0.5).astype(int)
        i_lo = int(np.ceil(self.x_range[0] / dx - 1e-9))
        i_hi = int(np.floor(self.x_range[1] / dx + 1e-9))
        if i_hi < i_lo:
            raise InputValidationError("empty field window")
        lattice = Lattice(dx, i_lo - int(k[-1]) - 1, i_hi - int(k[0]))
        zeta = np.round(np.arange(1, 51) * 0.1, 12) if self.zeta is None else np.asarray(self.zeta, float)
        E = z = None
        u0 = 1.0
        if scorer is not None:
            E = scorer.E_of_zeta(zeta)
            z = scorer.z_of_zeta(zeta)
            u0 = scorer.u0_surface
            if np.any(~np.isfinite(E)) or np.any(~np.isfinite(z)):
                raise InputValidationError("field rows extend beyond the profile's zeta range")
        self.spectral_ = spectral
        self.kernel_ = kernel_field(spectral, lattice, zeta, self.mu_max, self.panel_width,
                                    self.nodes_per_panel, self.n_theta, self.pieces, E, z, u0)
        self.f_grid_ = fx
        self.x_ = np.arange(i_lo, i_hi + 1) * dx
        self.zeta_ = zeta
        self.u0_surface_ = u0
        self.n_features_in_ = len(fx)
        return self

    def boundary(self, terrain):
        """Boundary data of a :class:`leewave.field.TerrainProfile` on ``f_grid_``."""
        check_is_fitted(self, "kernel_")
        return boundary_data(terrain, self.u0_surface_, self.f_grid_)

    def solve(self, f):
        """Full :class:`leewave.field.WaveField` for one datum (array or BoundaryData)."""
        check_is_fitted(self, "kernel_")
        if not isinstance(f, BoundaryData):
            f = BoundaryData(self.f_grid_, check_array(np.atleast_2d(f), ensure_min_features=2)[0])
        return solve(self.kernel_, f, self.x_)

    def transform(self, X):
        """Map rows of ``f`` samples to flattened fields ``w``.

        Parameters
        ----------
        X : array_like, shape (n_samples, len(f_grid_))

        Returns
        -------
        ndarray, shape (n_samples, len(zeta_) * len(x_))
            Row-major ``w[zeta, x]`` per sample.
        """
        check_is_fitted(self, "kernel_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InputValidationError(
                f"expected {self.n_features_in_} samples of f per row, got {X.shape[1]}")
        out = np.empty((X.shape[0], len(self.zeta_) * len(self.x_)))
        for n, row in enumerate(X):
            out[n] = solve(self.kernel_, BoundaryData(self.f_grid_, row), self.x_).w.ravel()
        return out
