"""Shared fixtures-in-spirit: small deterministic metrics and fields."""

import numpy as np

from lambda_lab.manifold import Metric


def conformal_metric(grid, amp=0.1):
    """e^{2u} delta for a fixed two-mode u; returns (metric, u)."""
    u = amp * (np.cos(grid.coords[0]) + 0.6 * np.sin(grid.coords[1] + 0.3))
    e = np.exp(2.0 * u)
    mat = np.zeros((grid.n, grid.n) + grid.res)
    for a in range(grid.n):
        mat[a, a] = e
    return Metric(grid, mat), u


def rand_sym(grid, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    t = rng.normal(size=(grid.n, grid.n) + grid.res) * scale
    return 0.5 * (t + np.swapaxes(t, 0, 1))
