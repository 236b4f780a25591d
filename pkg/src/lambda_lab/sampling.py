"""Seeded sample families for scans and acceptance runs.

Samplers draw grid-independent recipes (mode lists and constant matrices)
first and realize them on a grid second, so one draw can be evaluated at
several resolutions for stability comparisons. All randomness flows
through an explicit numpy Generator.
"""

from dataclasses import dataclass

import numpy as np

from .manifold import Metric, divergence_adjoint, hessian, laplace_beltrami, norm

KMAX = 3


def scalar_modes(rng, n, kmax=KMAX, count=6):
    """Mode list [(k, amp, phase), ...] for a band-limited mean-free scalar."""
    out = []
    for _ in range(count):
        k = rng.integers(-kmax, kmax + 1, size=n)
        amp = float(rng.normal())
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        if np.any(k):
            out.append((tuple(int(v) for v in k), amp, phase))
    return out


def eval_modes(grid, modes):
    u = np.zeros(grid.res)
    for k, amp, phase in modes:
        arg = sum(kk * x for kk, x in zip(k, grid.coords))
        u += amp * np.cos(arg + phase)
    return u


def lowest_conformal_modes(rng, n):
    """Single unit-frequency mode list, random axis and phase.

    The conformal direction built on such a mode is the slowest-decaying
    non-flat direction at the flat metric, so scans that feed minima into
    flow-side bounds must sample it; band-limited random mixtures
    essentially never land on it.
    """
    axis = int(rng.integers(0, n))
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    k = tuple(1 if i == axis else 0 for i in range(n))
    return [(k, 1.0, phase)]


def sym_recipe(rng, n, kmax=KMAX, count=6):
    rec = {}
    for i in range(n):
        for j in range(i, n):
            rec[(i, j)] = scalar_modes(rng, n, kmax, count)
    return rec


def eval_sym(grid, rec):
    h = np.zeros((grid.n, grid.n) + grid.res)
    for (i, j), modes in rec.items():
        f = eval_modes(grid, modes)
        h[i, j] = f
        h[j, i] = f
    return h


def vector_recipe(rng, n, kmax=KMAX, count=6):
    return [scalar_modes(rng, n, kmax, count) for _ in range(n)]


def eval_vector(grid, rec):
    return np.stack([eval_modes(grid, modes) for modes in rec])


def constant_traceless(rng, n):
    m = rng.normal(size=(n, n))
    m = 0.5 * (m + m.T)
    return m - np.trace(m) / n * np.eye(n)


def constant_sym(rng, n, scale=1.0):
    m = rng.normal(size=(n, n)) * scale
    return 0.5 * (m + m.T)


def conformal_tensor(g, u):
    """(Delta u) g - Hess u, the non-scaling conformal directions."""
    lap = laplace_beltrami(g, u)
    return np.einsum("...,ij...->ij...", lap, g.mat) - hessian(g, u)


@dataclass
class MixtureRecipe:
    """Grid-independent draw of one near-flat perturbation.

    weights order: (gauge, conformal, tt, flat). The flat slot moves along
    the flat family (constant symmetric matrices); the other three are the
    sectors of the kernel/image decompositions at the flat background.
    """

    weights: np.ndarray
    gauge: list
    conf: list
    tt: np.ndarray
    flat: np.ndarray
    radius: float


def draw_mixture(rng, n, radius_range=(0.005, 0.05), pure=None):
    w = rng.dirichlet(np.ones(4))
    if pure is not None:
        idx = {"gauge": 0, "conformal": 1, "tt": 2, "flat": 3}[pure]
        w = np.zeros(4)
        w[idx] = 1.0
    return MixtureRecipe(
        weights=w,
        gauge=vector_recipe(rng, n),
        conf=scalar_modes(rng, n),
        tt=constant_traceless(rng, n),
        flat=constant_sym(rng, n),
        radius=float(rng.uniform(*radius_range)),
    )


def _unit_c2(grid, field):
    nrm = norm(Metric.flat(grid), field, "C2")
    return field / nrm if nrm > 1e-30 else field


def realize_mixture(grid, rec):
    """Evaluate a MixtureRecipe on a grid.

    Returns (h, parts) where parts holds the four weighted components;
    their sum is h before the final radius normalization, after it each
    part carries the same rescaling so the sum property survives.
    """
    gflat = Metric.flat(grid)
    comp = {
        "gauge": divergence_adjoint(gflat, eval_vector(grid, rec.gauge)),
        "conformal": conformal_tensor(gflat, eval_modes(grid, rec.conf)),
        "tt": np.einsum("ij,...->ij...", rec.tt, np.ones(grid.res)),
        "flat": np.einsum("ij,...->ij...", rec.flat, np.ones(grid.res)),
    }
    parts = {}
    h = np.zeros((grid.n, grid.n) + grid.res)
    for name, w in zip(("gauge", "conformal", "tt", "flat"), rec.weights):
        parts[name] = w * _unit_c2(grid, comp[name])
        h = h + parts[name]
    nrm = norm(gflat, h, "C2")
    scale = rec.radius / nrm if nrm > 1e-30 else 0.0
    h *= scale
    for name in parts:
        parts[name] = parts[name] * scale
    return h, parts


def ball_metric(grid, rec):
    h, parts = realize_mixture(grid, rec)
    return Metric(grid, Metric.flat(grid).mat + h), h, parts


def flat_member(rng, n, scale=0.02):
    """Constant symmetric matrix near the identity; a flat-family point."""
    return np.eye(n) + constant_sym(rng, n, scale=scale)


def perturbation_pair(grid, rng, base_radius=0.1):
    """Near-flat base metric plus a unit-C2 direction for derivative checks."""
    gflat = Metric.flat(grid)
    k = eval_sym(grid, sym_recipe(rng, grid.n))
    k *= base_radius / norm(gflat, k, "C2")
    g = Metric(grid, gflat.mat + k)
    h = eval_sym(grid, sym_recipe(rng, grid.n))
    h /= norm(g, h, "C2")
    return g, h


def ker_div_sample(grid, rng, include_scale=True):
    """Divergence-free direction at flat: scale + conformal + constant traceless.

    Each summand is exactly divergence-free for the discrete operators,
    so the sum needs no projection.
    """
    gflat = Metric.flat(grid)
    u = eval_modes(grid, scalar_modes(rng, grid.n))
    h = conformal_tensor(gflat, u)
    h += np.einsum("ij,...->ij...", constant_traceless(rng, grid.n), np.ones(grid.res))
    if include_scale:
        h += float(rng.normal()) * 0.3 * gflat.mat
    return h
