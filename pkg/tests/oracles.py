"""Independent reference computations shared by the unit and acceptance tests."""

import math
from functools import lru_cache

import numpy as np


def scalar_wave(angle, n, phi_max):
    """Termwise oracle using math.sin and 1-based neuron indices."""
    return [math.sin(2 * math.pi * (i - 1) / (n - 1) - angle * math.pi / (2 * phi_max)) for i in range(1, n + 1)]


@lru_cache(maxsize=8)
def _grid_waves(n, phi_max, step):
    grid = np.arange(-round(phi_max / step), round(phi_max / step) + 1) * step
    theta = np.array([2 * math.pi * (i - 1) / (n - 1) for i in range(1, n + 1)])
    U = np.sin(theta[None, :] - grid[:, None] * math.pi / (2 * phi_max))
    return grid, U, np.einsum("ij,ij->i", U, U)


def grid_search_decode(wave, config, step=0.01):
    """Brute-force angle search; amplitude profiled out (best nonnegative gain) at each grid point.

    The squared residual ||w - g u||^2 is expanded as ||w||^2 - 2 g (u.w) + g^2 ||u||^2.
    """
    grid, U, norms = _grid_waves(config.n_neurons, float(config.phi_max), step)
    wave = np.asarray(wave, dtype=float)
    proj = U @ wave
    gain = np.maximum(proj / norms, 0.0)
    resid = wave @ wave - 2 * gain * proj + gain * gain * norms
    return float(grid[np.argmin(resid)])


def linear_fit_rmse(F, y):
    """RMSE of the best affine map from rows of F to y (ordinary least squares)."""
    A = np.c_[F, np.ones(len(F))]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.sqrt(np.mean((A @ coef - y) ** 2)))
