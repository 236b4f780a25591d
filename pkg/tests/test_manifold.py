"""Metric calculus: exact transposes, constant-metric identities, and
convergence order against analytic curvature."""

import numpy as np
import pytest

from lambda_lab.grid import PeriodicGrid
from lambda_lab.manifold import (Metric, connection_laplacian_sym2,
                                 covector_divergence, divergence,
                                 divergence_adjoint, hessian, hessian_adjoint,
                                 inner_l2, integrate, laplace_beltrami,
                                 lichnerowicz, norm, norm_l2, tensor_inner,
                                 trace)

from helpers import conformal_metric, rand_sym


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid((17, 17))


@pytest.fixture(scope="module")
def gconf(grid):
    return conformal_metric(grid)[0]


def test_flat_is_exactly_flat(grid):
    g = Metric.flat(grid)
    assert np.abs(g.christoffel).max() == 0.0
    assert np.abs(g.curvature.riemann).max() == 0.0
    assert np.abs(g.curvature.ricci).max() == 0.0
    assert np.abs(g.curvature.scalar).max() == 0.0
    assert g.volume() == pytest.approx(4.0 * np.pi**2, rel=1e-13)


def test_constant_metric_is_flat(grid):
    m = np.array([[1.3, 0.2], [0.2, 0.9]])
    g = Metric.from_constant(grid, m)
    assert np.abs(g.christoffel).max() == 0.0
    assert np.abs(g.curvature.scalar).max() == 0.0
    assert g.volume() == pytest.approx(np.sqrt(np.linalg.det(m)) * 4 * np.pi**2,
                                       rel=1e-13)
    assert g.is_constant(1e-15)


def test_spd_enforced(grid):
    mat = np.zeros((2, 2) + grid.res)
    mat[0, 0] = 1.0
    mat[1, 1] = -1.0
    with pytest.raises(ValueError):
        Metric(grid, mat)


def test_laplace_trig_eigenfunction(grid):
    # at the flat metric the divergence-form Laplacian acts on cos(q x)
    # exactly as multiplication by -(sin(q h)/h)^2
    g = Metric.flat(grid)
    q = 2
    sym = np.sin(q * grid.h[0]) / grid.h[0]
    u = np.cos(q * grid.coords[0])
    assert np.abs(laplace_beltrami(g, u) + sym**2 * u).max() <= 1e-12


def test_laplace_self_adjoint_nonpositive(gconf):
    grid = gconf.grid
    rng = np.random.default_rng(5)
    u = rng.normal(size=grid.res)
    v = rng.normal(size=grid.res)
    a = integrate(gconf, laplace_beltrami(gconf, u) * v)
    b = integrate(gconf, u * laplace_beltrami(gconf, v))
    assert abs(a - b) <= 1e-9 * max(abs(a), 1.0)
    assert integrate(gconf, u * laplace_beltrami(gconf, u)) <= 1e-12


def test_hessian_trace_is_laplacian_at_constant(grid):
    g = Metric.from_constant(grid, np.array([[1.2, 0.3], [0.3, 0.8]]))
    rng = np.random.default_rng(6)
    u = rng.normal(size=grid.res)
    tr_hess = np.einsum("ij...,ij...->...", g.inv, hessian(g, u))
    assert np.abs(tr_hess - laplace_beltrami(g, u)).max() <= 1e-11


def test_divergence_adjoint_exact(gconf):
    grid = gconf.grid
    h = rand_sym(grid, 7)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(grid.n,) + grid.res)
    lhs = inner_l2(gconf, divergence(gconf, h), x)
    rhs = inner_l2(gconf, h, divergence_adjoint(gconf, x))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_divergence_adjoint_flat_formula(grid):
    # at constant metrics div* X reduces to the symmetrized gradient with
    # a minus half
    g = Metric.flat(grid)
    rng = np.random.default_rng(9)
    x = rng.normal(size=(grid.n,) + grid.res)
    dx = np.stack([grid.grad(x[c]) for c in range(grid.n)])  # [c, a]
    want = -0.5 * (np.einsum("ca...->ac...", dx) + dx)
    assert np.abs(divergence_adjoint(g, x) - want).max() <= 1e-13


def test_hessian_adjoint_exact(gconf):
    grid = gconf.grid
    rng = np.random.default_rng(10)
    u = rng.normal(size=grid.res)
    h = rand_sym(grid, 11)
    lhs = inner_l2(gconf, hessian(gconf, u), h)
    rhs = integrate(gconf, u * hessian_adjoint(gconf, h))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_covector_divergence_flat(grid):
    g = Metric.flat(grid)
    rng = np.random.default_rng(12)
    om = rng.normal(size=(grid.n,) + grid.res)
    want = sum(grid.diff(om[a], a) for a in range(grid.n))
    assert np.abs(covector_divergence(g, om) - want).max() <= 1e-13


def test_connection_laplacian_componentwise_at_constant(grid):
    g = Metric.from_constant(grid, np.array([[1.1, 0.0], [0.0, 0.7]]))
    h = rand_sym(grid, 13)
    got = connection_laplacian_sym2(g, h)
    want = np.zeros_like(h)
    for i in range(grid.n):
        for j in range(grid.n):
            want[i, j] = laplace_beltrami(g, h[i, j])
    assert np.abs(got - want).max() <= 1e-10


def test_connection_laplacian_self_adjoint_nonpositive(gconf):
    h = rand_sym(gconf.grid, 14)
    k = rand_sym(gconf.grid, 15)
    a = inner_l2(gconf, connection_laplacian_sym2(gconf, h), k)
    b = inner_l2(gconf, h, connection_laplacian_sym2(gconf, k))
    assert abs(a - b) <= 1e-9 * max(abs(a), 1.0)
    assert inner_l2(gconf, h, connection_laplacian_sym2(gconf, h)) <= 1e-10


def test_lichnerowicz_trig_at_flat(grid):
    g = Metric.flat(grid)
    q = 3
    sym2 = (np.sin(q * grid.h[0]) / grid.h[0]) ** 2
    e = np.array([[1.0, 0.5], [0.5, -1.0]])
    h = np.einsum("ij,...->ij...", e, np.cos(q * grid.coords[0]))
    assert np.abs(lichnerowicz(g, h) + sym2 * h).max() <= 1e-11


def test_riemann_2d_structure_exact(gconf):
    # in two dimensions the discrete Riemann tensor keeps the exact
    # algebraic form (R/2)(g_ij g_pq - g_iq g_pj)
    c = gconf.curvature
    g = gconf
    want = 0.5 * (np.einsum("...,ij...,pq...->ipjq...", c.scalar, g.mat, g.mat)
                  - np.einsum("...,iq...,pj...->ipjq...", c.scalar, g.mat, g.mat))
    scale = np.abs(c.riemann).max()
    assert np.abs(c.riemann - want).max() <= 1e-13 * scale


def test_riemann_contracts_to_ricci(gconf):
    c = gconf.curvature
    contr = np.einsum("pq...,ipjq...->ij...", gconf.inv, c.riemann)
    scale = np.abs(c.ricci).max()
    assert np.abs(contr - c.ricci).max() <= 1e-13 * scale


def test_scalar_curvature_second_order():
    # oracle: R = -2 e^{-2u} Delta u for e^{2u} delta in 2D
    errs = []
    for res in (17, 33):
        grid = PeriodicGrid((res, res))
        g, u = conformal_metric(grid)
        lap_u = -0.1 * (np.cos(grid.coords[0])
                        + 0.6 * np.sin(grid.coords[1] + 0.3))
        r_exact = -2.0 * np.exp(-2.0 * u) * lap_u
        errs.append(np.abs(g.curvature.scalar - r_exact).max())
    assert errs[0] <= 2e-2
    assert errs[0] / errs[1] >= 3.0  # second order would give 3.77


def test_gauss_bonnet_exact(gconf):
    # the total curvature of the discrete conformal torus telescopes to
    # zero exactly, not just to discretization order
    total = integrate(gconf, gconf.curvature.scalar)
    assert abs(total) <= 1e-12


def test_trace_of_metric(gconf):
    assert np.abs(trace(gconf, gconf.mat) - gconf.grid.n).max() <= 1e-13


def test_tensor_inner_matches_manual(gconf):
    grid = gconf.grid
    h = rand_sym(grid, 16)
    k = rand_sym(grid, 17)
    manual = np.einsum("ia...,jb...,ij...,ab...->...",
                       gconf.inv, gconf.inv, h, k)
    assert np.abs(tensor_inner(gconf, h, k) - manual).max() <= 1e-12


def test_norm_kinds(gconf):
    grid = gconf.grid
    h = rand_sym(grid, 18)
    l2 = norm(gconf, h, "L2")
    h1 = norm(gconf, h, "H1")
    h2 = norm(gconf, h, "H2")
    assert l2 <= h1 <= h2
    assert norm(gconf, h, "C0") == np.abs(h).max()
    with pytest.raises(ValueError):
        norm(gconf, h, "L2_f")
    with pytest.raises(ValueError):
        norm(gconf, h, "C9")
    f = np.zeros(grid.res)
    assert norm(gconf, h, "L2_f", f=f) == pytest.approx(l2, rel=1e-12)


def test_weighted_inner(gconf):
    grid = gconf.grid
    u = np.ones(grid.res)
    w = np.exp(-np.ones(grid.res))
    got = inner_l2(gconf, u, u, weight=w)
    assert got == pytest.approx(np.exp(-1.0) * gconf.volume(), rel=1e-12)


def test_norm_l2_of_metric_direction(grid):
    g = Metric.flat(grid)
    e = np.einsum("ij,...->ij...", np.eye(2), np.ones(grid.res))
    # |g|^2 integrates tr(I) = n over the volume
    assert norm_l2(g, e) == pytest.approx(np.sqrt(2.0) * 2 * np.pi, rel=1e-12)
