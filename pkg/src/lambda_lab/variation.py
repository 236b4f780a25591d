"""Variations of the lowest eigenvalue along metric directions.

Four routes coexist and cross-check each other:

- "perelman": the first-variation integral against the gradient field
  Rc + Hess f in the weighted measure.
- "perturbation-series": exact eigenvalue perturbation theory for the
  assembled operator family, using the polynomial-in-epsilon coefficients
  from the jets module and the reduced resolvent. Contour quadrature of
  the same resolvent expressions is kept as an internal cross-check and
  recorded in diagnostics, not as a separate method.
- "closed-form-ricci-flat": the Lichnerowicz quadratic form at a flat
  background, valid for divergence-free directions.
- "finite-difference": Richardson-extrapolated differences of the
  eigenvalue itself, the model-independent oracle.

All pairings live in the base metric's discrete L^2(dV_g) inner product;
the series formulas need only a simple lowest eigenvalue, not symmetry of
the coefficient operators, so they hold although H'[h] fails to be
self-adjoint when tr h varies.
"""

from dataclasses import dataclass, field

import numpy as np

from .jets import operator_derivatives
from .manifold import (Metric, covector_divergence, divergence, hessian,
                       inner_l2, lichnerowicz, norm, norm_l2, trace)
from .spectral import ground_state

FLAT_TOL = 1e-8
DIV_TOL = 1e-6


@dataclass
class VariationResult:
    """One variation evaluation with every route that was run.

    value is the primary route's number; values maps method tags to all
    evaluated routes (primary included). cross_error is the worst
    disagreement of any alternate route against the primary, normalized
    by 1 + |value|, matching how the agreement tolerances are stated.
    """

    order: int
    value: float
    method: str
    values: dict
    cross_error: float
    diagnostics: dict = field(default_factory=dict)
    g_id: str = ""
    h_id: str = ""
    seed: int = -1


def _finish(order, method, values, diagnostics, g_id, h_id, seed):
    primary = values[method]
    cross = 0.0
    for tag, v in values.items():
        if tag != method:
            cross = max(cross, abs(v - primary) / (1.0 + abs(primary)))
    return VariationResult(order=order, value=primary, method=method, values=values,
                           cross_error=cross, diagnostics=diagnostics,
                           g_id=g_id, h_id=h_id, seed=seed)


def _lam(grid, mat, k=4):
    return ground_state(Metric(grid, mat), k=k).lam


def fd_first(lam_fn, e0=1e-2):
    """Centered first difference with two Richardson levels, O(e0^6)."""
    def d(e):
        return (lam_fn(e) - lam_fn(-e)) / (2.0 * e)
    d1, d2, d3 = d(e0), d(e0 / 2), d(e0 / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def fd_second(lam_fn, lam0, e0=1e-2):
    def d(e):
        return (lam_fn(e) - 2.0 * lam0 + lam_fn(-e)) / e**2
    d1, d2, d3 = d(e0), d(e0 / 2), d(e0 / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def fd_third(lam_fn, e0=2e-2):
    """5-point centered third difference with one Richardson level, O(e0^4)."""
    def d(e):
        return (lam_fn(2 * e) - 2 * lam_fn(e) + 2 * lam_fn(-e) - lam_fn(-2 * e)) / (2 * e**3)
    d1, d2 = d(e0), d(e0 / 2)
    return (4.0 * d2 - d1) / 3.0


def h_prime_apply(g, h, u):
    """Termwise first-order operator applied to a scalar field.

    4 h:Hess u + 4 (div h).Du - 2 (D tr h).Du
    + (-<h,Rc> + div div h - Delta tr h) u,
    every piece built from the manifold module's discrete operators. This
    is the continuum formula transcribed; it matches the exact derivative
    of the assembled operator to discretization order, and exactly for
    constant h at constant g.
    """
    hes = hessian(g, u)
    du = g.grid.grad(u)
    hup = np.einsum("ia...,jb...,ab...->ij...", g.inv, g.inv, h)
    term1 = 4.0 * np.einsum("ij...,ij...->...", hup, hes)
    divh = divergence(g, h)
    term2 = 4.0 * np.einsum("jk...,j...,k...->...", g.inv, divh, du)
    trh = trace(g, h)
    dtr = g.grid.grad(trh)
    term3 = -2.0 * np.einsum("jk...,j...,k...->...", g.inv, dtr, du)
    ric = g.curvature.ricci
    pot = (-np.einsum("ij...,ij...->...", hup, ric)
           + covector_divergence(g, divh)
           - _scalar_laplacian(g, trh))
    return term1 + term2 + term3 + pot * u


def _scalar_laplacian(g, u):
    from .manifold import laplace_beltrami
    return laplace_beltrami(g, u)


def h_prime_symmetry_residual(g, h, sd=None, probes=4, seed=0):
    """Relative asymmetry of H'[h] in L^2(dV_g) over random probe pairs.

    Reported, not asserted: the derivative of the operator family is
    self-adjoint in the fixed base inner product only when tr h is
    constant, because the family's own inner product moves with epsilon.
    """
    h1 = operator_derivatives(g, h)[0]
    if sd is None:
        sd = ground_state(g, k=4)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        u = rng.normal(size=g.grid.num_nodes)
        v = rng.normal(size=g.grid.num_nodes)
        a = sd.inner(u, h1 @ v)
        b = sd.inner(h1 @ u, v)
        scale = max(abs(a), abs(b), 1e-30)
        worst = max(worst, abs(a - b) / scale)
    return worst


def gradient_field(g, sd=None):
    """Rc + Hess f with orthogonality and ordering diagnostics."""
    if sd is None:
        sd = ground_state(g, k=4)
    ric = g.curvature.ricci
    grad = ric + hessian(g, sd.f)
    wgt = np.exp(-sd.f)
    orth = inner_l2(g, hessian(g, sd.f), grad, weight=wgt)
    n_g = norm_l2(g, grad, weight=wgt)
    n_rc_f = norm_l2(g, ric, weight=wgt)
    diagnostics = {
        "orthogonality": orth,
        "grad_l2f": n_g,
        "ricci_l2f": n_rc_f,
        "ricci_l2": norm_l2(g, ric),
        "ordering_ok": bool(n_g <= n_rc_f + 1e-8),
    }
    return grad, diagnostics


def first_variation(g, h, sd=None, fd_oracle=False, e0=1e-2,
                    g_id="", h_id="", seed=-1):
    """Order-1 variation; primary value from the gradient-field integral."""
    if sd is None:
        sd = ground_state(g, k=4)
    grad, gdiag = gradient_field(g, sd)
    perelman = -inner_l2(g, h, grad, weight=np.exp(-sd.f))
    h1 = operator_derivatives(g, h)[0]
    wf = sd.w.reshape(-1)
    series = sd.inner(wf, h1 @ wf)
    values = {"perelman": perelman, "perturbation-series": series}
    diagnostics = {"gradient": gdiag, "richardson_order": 2, "fd_step": None}
    if fd_oracle:
        values["finite-difference"] = fd_first(
            lambda e: _lam(g.grid, g.mat + e * h), e0)
        diagnostics["fd_step"] = e0
    return _finish(1, "perelman", values, diagnostics, g_id, h_id, seed)


def _series_second(sd, h1, h2x2):
    wf = sd.w.reshape(-1)
    t_h2 = sd.inner(wf, h2x2 @ wf)
    s1 = sd.reduced_resolvent(h1 @ wf)
    t_res = 2.0 * sd.inner(wf, h1 @ s1)
    return t_h2, t_res


def _contour_second(sd, h1):
    wf = sd.w.reshape(-1)
    b = h1 @ wf

    def integrand(z):
        return sd.inner(wf, h1 @ sd.resolvent_solve(z, b)) / (z - sd.lam)
    return 2.0 * sd.contour_integrate(integrand)


def second_variation(g, h, sd=None, contour=False, fd_oracle=False, e0=1e-2,
                     g_id="", h_id="", seed=-1):
    """Order-2 variation via the reduced resolvent series."""
    if sd is None:
        sd = ground_state(g, k=4)
    h1, h2x2, _ = operator_derivatives(g, h)
    t_h2, t_res = _series_second(sd, h1, h2x2)
    series = t_h2 + t_res
    values = {"perturbation-series": series}
    diagnostics = {"terms": {"h2": t_h2, "resolvent": t_res},
                   "contour_radius": None, "fd_step": None, "richardson_order": 2}
    if contour:
        c_res = _contour_second(sd, h1)
        diagnostics["contour_terms"] = {"resolvent": float(np.real(c_res))}
        diagnostics["contour_value"] = float(np.real(t_h2 + c_res))
        diagnostics["contour_radius"] = sd.gap / 4.0
    if fd_oracle:
        values["finite-difference"] = fd_second(
            lambda e: _lam(g.grid, g.mat + e * h), sd.lam, e0)
        diagnostics["fd_step"] = e0
    return _finish(2, "perturbation-series", values, diagnostics, g_id, h_id, seed)


def second_variation_ricci_flat(g, h, flat_tol=FLAT_TOL, div_tol=DIV_TOL,
                                g_id="", h_id="", seed=-1):
    """Closed form <h, Lichnerowicz h> / (2 Vol) at a flat background.

    Preconditions: the background's Ricci norm is below flat_tol and h is
    divergence-free relative to its H^1 size.
    """
    rc = norm_l2(g, g.curvature.ricci)
    if rc > flat_tol:
        raise ValueError(f"background not flat: |Rc| = {rc:.3e}")
    dv = norm_l2(g, divergence(g, h))
    h_h1 = norm(g, h, "H1")
    if dv > div_tol * max(h_h1, 1e-30):
        raise ValueError(f"direction not divergence-free: |div h| = {dv:.3e}")
    value = inner_l2(g, h, lichnerowicz(g, h)) / (2.0 * g.volume())
    values = {"closed-form-ricci-flat": value}
    diagnostics = {"ricci_l2": rc, "div_l2": dv}
    return _finish(2, "closed-form-ricci-flat", values, diagnostics, g_id, h_id, seed)


def _series_third(sd, h1, h2x2, h3x6):
    wf = sd.w.reshape(-1)
    beta = sd.inner(wf, h1 @ wf)
    s1 = sd.reduced_resolvent(h1 @ wf)
    terms = {
        "h3": sd.inner(wf, h3x6 @ wf),
        "res2": 6.0 * sd.inner(wf, h1 @ sd.reduced_resolvent(h1 @ s1)),
        "mixed_a": 3.0 * sd.inner(wf, h1 @ sd.reduced_resolvent(h2x2 @ wf)),
        "mixed_b": 3.0 * sd.inner(wf, h2x2 @ s1),
        "weighted": -6.0 * beta * sd.inner(wf, h1 @ sd.reduced_resolvent(s1)),
    }
    return terms, beta


def _deflate(sd, v):
    """Remove the ground-state component in the bilinear rho pairing."""
    wf = sd.w.reshape(-1)
    return v - wf * (np.sum(wf * v * sd.rho) * sd.node_volume)


def _contour_third(sd, h1, h2x2, beta):
    # the ground component of each resolvent argument is projected away
    # so that every integrand keeps a simple pole whose residue is
    # exactly the matching reduced-resolvent term (the projected-out
    # pieces are higher-order poles whose residues pair across terms)
    wf = sd.w.reshape(-1)
    q1 = _deflate(sd, h1 @ wf)
    b2 = h2x2 @ wf

    def f_res2(z):
        r1 = sd.resolvent_solve(z, q1)
        r2 = sd.resolvent_solve(z, _deflate(sd, h1 @ r1))
        return sd.inner(wf, h1 @ r2) / (z - sd.lam)

    def f_mixed_a(z):
        return sd.inner(wf, h1 @ sd.resolvent_solve(z, b2)) / (z - sd.lam)

    def f_mixed_b(z):
        return sd.inner(wf, h2x2 @ sd.resolvent_solve(z, q1)) / (z - sd.lam)

    def f_weighted(z):
        return sd.inner(wf, h1 @ sd.resolvent_solve(z, q1)) / (z - sd.lam) ** 2

    # d/dz of the resolvent brings one minus sign, so the series factor
    # -6 beta <w, H1 S^2 H1 w> appears here with +6 beta
    return {
        "res2": 6.0 * float(np.real(sd.contour_integrate(f_res2))),
        "mixed_a": 3.0 * float(np.real(sd.contour_integrate(f_mixed_a))),
        "mixed_b": 3.0 * float(np.real(sd.contour_integrate(f_mixed_b))),
        "weighted": 6.0 * beta * float(np.real(sd.contour_integrate(f_weighted))),
    }


def third_variation(g, h, sd=None, contour=False, fd_oracle=False, e0=2e-2,
                    g_id="", h_id="", seed=-1):
    """Order-3 variation: the five-term reduced-resolvent formula."""
    if sd is None:
        sd = ground_state(g, k=4)
    h1, h2x2, h3x6 = operator_derivatives(g, h)
    terms, beta = _series_third(sd, h1, h2x2, h3x6)
    series = sum(terms.values())
    values = {"perturbation-series": series}
    diagnostics = {"terms": terms, "beta": beta,
                   "contour_radius": None, "fd_step": None, "richardson_order": 1}
    if contour:
        diagnostics["contour_terms"] = _contour_third(sd, h1, h2x2, beta)
        diagnostics["contour_value"] = terms["h3"] + sum(
            diagnostics["contour_terms"].values())
        diagnostics["contour_radius"] = sd.gap / 4.0
    if fd_oracle:
        values["finite-difference"] = fd_third(
            lambda e: _lam(g.grid, g.mat + e * h), e0)
        diagnostics["fd_step"] = e0
    return _finish(3, "perturbation-series", values, diagnostics, g_id, h_id, seed)


def third_variation_bound_scan(grid, n_samples=100, s_ladder=(0.02, 0.01, 0.005),
                               seed=0, base_radius=0.02):
    """Ratio |D^3 lambda| / (|h|_C2 |h|_H1^2) along shrinking rays.

    Each sample draws a near-flat base and a unit direction, then
    evaluates the ratio at every rung of the s-ladder independently; the
    spread max/min over the ladder measures how close to exactly cubic
    the implementation is. Deterministic under the seed.
    """
    from .sampling import eval_sym, sym_recipe
    rng = np.random.default_rng(seed)
    gflat = Metric.flat(grid)
    samples = []
    for idx in range(n_samples):
        k = eval_sym(grid, sym_recipe(rng, grid.n))
        k *= base_radius / norm(gflat, k, "C2")
        g = Metric(grid, gflat.mat + k)
        h0 = eval_sym(grid, sym_recipe(rng, grid.n))
        h0 /= norm(g, h0, "C2")
        sd = ground_state(g, k=4)
        ratios = []
        for s in s_ladder:
            hs = s * h0
            res = third_variation(g, hs, sd=sd)
            denom = norm(g, hs, "C2") * norm(g, hs, "H1") ** 2
            ratios.append(abs(res.value) / denom)
        ratios = np.array(ratios)
        samples.append({
            "index": idx,
            "ratios": ratios.tolist(),
            "spread": float(ratios.max() / max(ratios.min(), 1e-300)),
            "max_ratio": float(ratios.max()),
        })
    return {
        "seed": seed,
        "s_ladder": list(s_ladder),
        "n_samples": n_samples,
        "max_ratio": max(s["max_ratio"] for s in samples),
        "worst_spread": max(s["spread"] for s in samples),
        "samples": samples,
    }


def linearized_gradient(g, h, flat_tol=FLAT_TOL, div_tol=DIV_TOL):
    """Linearization at a flat background: (-1/2 Lichnerowicz h, 1/2 tr h)."""
    rc = norm_l2(g, g.curvature.ricci)
    if rc > flat_tol:
        raise ValueError(f"background not flat: |Rc| = {rc:.3e}")
    dv = norm_l2(g, divergence(g, h))
    if dv > div_tol * max(norm(g, h, "H1"), 1e-30):
        raise ValueError(f"direction not divergence-free: |div h| = {dv:.3e}")
    return -0.5 * lichnerowicz(g, h), 0.5 * trace(g, h)


def taylor_remainder(g_rf, gbar, h):
    """Remainder of the linear model of the gradient field.

    R = gradient_field(gbar + h) + 1/2 Lichnerowicz_{g_rf} h, reported
    against the two product bounds it should obey: |h|_C2 |h|_H2 for the
    quadratic part and |gbar - g_rf|_C2 |h|_H2 for the moved background.
    """
    grid = g_rf.grid
    g_pert = Metric(grid, gbar.mat + h)
    grad, _ = gradient_field(g_pert)
    r = grad + 0.5 * lichnerowicz(g_rf, h)
    r_l2 = norm_l2(g_rf, r)
    h_c2 = norm(g_rf, h, "C2")
    h_h2 = norm(g_rf, h, "H2")
    base_c2 = norm(g_rf, gbar.mat - g_rf.mat, "C2")
    return {
        "remainder_l2": r_l2,
        "bound_quadratic": h_c2 * h_h2,
        "bound_background": base_c2 * h_h2,
        "ratio_quadratic": r_l2 / max(h_c2 * h_h2, 1e-300),
        "ratio_background": r_l2 / max(base_c2 * h_h2, 1e-300) if base_c2 > 0 else None,
    }


def export_variation_csv(results, path):
    """Write VariationResult batches as delimited rows, one row per method."""
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "method", "value", "cross_error", "g_id", "h_id", "seed"])
        for res in results:
            for tag, v in res.values.items():
                if tag == res.method:
                    cross = res.cross_error
                else:
                    cross = abs(v - res.value) / (1.0 + abs(res.value))
                writer.writerow([res.order, tag, repr(float(v)), repr(float(cross)),
                                 res.g_id, res.h_id, res.seed])
