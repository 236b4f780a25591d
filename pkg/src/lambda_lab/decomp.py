"""Tensor decompositions at and around flat backgrounds.

Two orthogonal splits: symmetric 2-tensors into gauge-orthogonal plus
pure-gauge parts (ker div against im div*), and the refinement of the
divergence-free part at a flat background into scaling, conformal image,
and transverse traceless sectors. Constant-coefficient backgrounds get
exact per-mode Fourier solvers; the general gauge solve falls back to a
conjugate-gradient loop in the metric inner product.

All adjoint appearances are the manifold module's exact discrete
transposes, so reassembly and orthogonality checks sit at round-off.
"""

from dataclasses import dataclass

import numpy as np

from .grid import sym_index_pairs
from .lfld import write_field
from .manifold import (Metric, divergence, divergence_adjoint, hessian,
                       hessian_adjoint, inner_l2, laplace_beltrami, lichnerowicz,
                       norm, norm_l2, trace)

CONST_TOL = 1e-13


def conformal_op(g, u):
    """(Delta u) g - Hess u; maps scalars into divergence-free directions
    at flat backgrounds."""
    lap = laplace_beltrami(g, u)
    return np.einsum("...,ij...->ij...", lap, g.mat) - hessian(g, u)


def conformal_adjoint(g, h):
    """Exact discrete adjoint of conformal_op: Delta(tr h) - Hess* h."""
    return laplace_beltrami(g, trace(g, h)) - hessian_adjoint(g, h)


def flat_tangent_basis(n):
    """Constant symmetric matrices: the flat family's tangent directions."""
    out = []
    for i, j in sym_index_pairs(n):
        e = np.zeros((n, n))
        e[i, j] = 1.0
        e[j, i] = 1.0
        out.append(e)
    return out


def _require_constant(g):
    if not g.is_constant(CONST_TOL):
        raise ValueError("this path needs a constant-coefficient background")


def _mode_weights(g):
    """|sigma|^2_g and the raised symbol over the FFT lattice."""
    grid = g.grid
    syms = grid.fourier_symbols()
    sigma = np.stack([np.broadcast_to(s, grid.res) for s in syms])
    g0 = g.mat[(slice(None), slice(None)) + (0,) * grid.n]
    ginv0 = np.linalg.inv(g0)
    sigma_up = np.einsum("ik,k...->i...", ginv0, sigma)
    s2 = np.einsum("i...,i...->...", sigma, sigma_up)
    return sigma, sigma_up, s2, g0, ginv0


@dataclass
class GaugeSplit:
    """h = h0 + div* X with h0 divergence-free."""

    h0: np.ndarray
    x: np.ndarray
    residuals: dict


def _vector_inner(g, x, y):
    dens = np.einsum("jl...,j...,l...->...", g.inv, x, y) * g.sqrt_det
    return g.grid.integrate(dens)


def _gauge_solve_fft(g, b):
    # per-mode 2x2/3x3 inverse of the normal operator's symbol
    # M = (|sigma|^2 I + sigma (x) sigma_sharp) / 2, Sherman-Morrison form
    grid = g.grid
    sigma, sigma_up, s2, _, ginv0 = _mode_weights(g)
    bh = np.stack([np.fft.fftn(b[j]) for j in range(grid.n)])
    s2safe = np.where(s2 > 0, s2, 1.0)
    sb = np.einsum("ik,i...,k...->...", ginv0, sigma, bh)
    xh = (2.0 / s2safe) * (bh - np.einsum("j...,...->j...", sigma,
                                          sb / (2.0 * s2safe)))
    xh[:, s2 <= 0] = 0.0
    return np.stack([np.real(np.fft.ifftn(xh[j])) for j in range(grid.n)])


def _gauge_solve_cg(g, b, tol, maxiter):
    # conjugate gradients in the L^2(dV_g) covector inner product; the
    # normal operator is self-adjoint PSD there, with kernel the discrete
    # Killing covectors. b = div h is orthogonal to that kernel exactly
    # (the operators are exact transposes of each other), so the
    # singular-but-consistent system needs no projection; any kernel
    # drift in X is annihilated by div* downstream.
    def apply(x):
        return divergence(g, divergence_adjoint(g, x))

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = _vector_inner(g, r, r)
    b_norm = np.sqrt(max(rr, 1e-300))
    for _ in range(maxiter):
        if np.sqrt(max(rr, 0.0)) <= tol * b_norm:
            break
        ap = apply(p)
        alpha = rr / _vector_inner(g, p, ap)
        x += alpha * p
        r -= alpha * ap
        rr_new = _vector_inner(g, r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    else:
        raise RuntimeError("gauge solve did not converge")
    return x


def gauge_split(g, h, tol=1e-12, maxiter=5000):
    """Split h into a divergence-free part and a pure-gauge part.

    Solves the normal equations div(div* X) = div h for a mean-zero
    covector field X (constant fields are Killing at constant g and vary
    nothing), then subtracts. Constant backgrounds use the exact
    per-mode solver.
    """
    b = divergence(g, h)
    if g.is_constant(CONST_TOL):
        x = _gauge_solve_fft(g, b)
    else:
        x = _gauge_solve_cg(g, b, tol, maxiter)
    pure = divergence_adjoint(g, x)
    h0 = h - pure
    h_h1 = norm(g, h, "H1")
    residuals = {
        "div_h0": norm_l2(g, divergence(g, h0)),
        "div_h0_rel": norm_l2(g, divergence(g, h0)) / max(h_h1, 1e-300),
        "orthogonality": inner_l2(g, h0, pure),
        "orthogonality_rel": abs(inner_l2(g, h0, pure))
        / max(norm_l2(g, h) ** 2, 1e-300),
    }
    return GaugeSplit(h0=h0, x=x, residuals=residuals)


@dataclass
class TTSplit:
    """Refinement of a divergence-free tensor at a flat background."""

    scale: np.ndarray
    conformal: np.ndarray
    generator: np.ndarray
    tt: np.ndarray
    kernel: np.ndarray
    residuals: dict


def _conformal_solve(g, b):
    # C*C has symbol (n-1)|sigma|^4 at constant backgrounds
    grid = g.grid
    _, _, s2, _, _ = _mode_weights(g)
    bh = np.fft.fftn(b)
    denom = (grid.n - 1) * s2 * s2
    uh = np.where(denom > 0, bh / np.where(denom > 0, denom, 1.0), 0.0)
    return np.real(np.fft.ifftn(uh))


def tt_split(g, h, div_tol=1e-6):
    """scale + conformal + TT decomposition of a divergence-free tensor.

    The conformal generator is pinned mean-zero; the TT part is obtained
    by subtraction and its kernel component (constant traceless matrices
    on the flat torus) is read off the node mean.
    """
    _require_constant(g)
    grid = g.grid
    dv = norm_l2(g, divergence(g, h))
    if dv > div_tol * max(norm(g, h, "H1"), 1e-300):
        raise ValueError(f"input not divergence-free: |div h| = {dv:.3e}")
    c = inner_l2(g, h, g.mat) / inner_l2(g, g.mat, g.mat)
    scale = c * g.mat
    rem = h - scale
    u = _conformal_solve(g, conformal_adjoint(g, rem))
    u -= u.mean()
    conf = conformal_op(g, u)
    tt = rem - conf
    flat_axes = tuple(range(2, 2 + grid.n))
    mean = tt.mean(axis=flat_axes)
    g0 = g.mat[(slice(None), slice(None)) + (0,) * grid.n]
    ginv0 = np.linalg.inv(g0)
    mean_tf = mean - np.einsum("ij,ij", ginv0, mean) / grid.n * g0
    kernel = np.einsum("ij,...->ij...", mean_tf, np.ones(grid.res))
    parts = {"scale": scale, "conformal": conf, "tt": tt}
    residuals = {
        "reassembly": float(np.abs(scale + conf + tt - h).max()),
        "div_input": dv,
        "tr_tt": norm_l2(g, trace(g, tt)),
        "div_tt": norm_l2(g, divergence(g, tt)),
    }
    names = list(parts)
    for i, a in enumerate(names):
        for b_name in names[i + 1:]:
            key = f"orth_{a}_{b_name}"
            residuals[key] = inner_l2(g, parts[a], parts[b_name])
    return TTSplit(scale=scale, conformal=conf, generator=u, tt=tt,
                   kernel=kernel, residuals=residuals)


def project_normal(g, h, div_tol=1e-6):
    """Remove the flat-family tangent component (the node-mean matrix).

    At a constant background the zero Fourier mode of a divergence-free
    tensor spans scale plus kernel directions, exactly the tangent space
    of the flat family; what remains is the coercivity subspace.
    """
    _require_constant(g)
    dv = norm_l2(g, divergence(g, h))
    if dv > div_tol * max(norm(g, h, "H1"), 1e-300):
        raise ValueError(f"input not divergence-free: |div h| = {dv:.3e}")
    flat_axes = tuple(range(2, 2 + g.grid.n))
    return h - h.mean(axis=flat_axes, keepdims=True)


def normal_coercivity_scan(grid, n_samples=100, seed=0, background=None):
    """Empirical coercivity constant of the Lichnerowicz form on the
    normal subspace: the largest c with <h, -L h> >= c |h|_H1^2 over the
    samples. The H1 normalization keeps c order one on every grid."""
    from .sampling import ker_div_sample
    g = background if background is not None else Metric.flat(grid)
    rng = np.random.default_rng(seed)
    worst = np.inf
    used = 0
    for _ in range(n_samples):
        h = ker_div_sample(grid, rng)
        hn = project_normal(g, h)
        nn = norm(g, hn, "H1") ** 2
        if nn < 1e-20:
            continue
        rayleigh = inner_l2(g, hn, lichnerowicz(g, hn)) / nn
        worst = min(worst, -rayleigh)
        used += 1
    return {"c_empirical": float(worst), "samples": used, "seed": seed}


def lichnerowicz_spectrum(g, sector="all", k=None, which="smallest"):
    """Spectrum of the Lichnerowicz form restricted to a sector at a
    constant flat background, by exact mode enumeration.

    sector: all | ker_div | tt | im_c | scale. Eigenvalues are the scalar
    symbol -|sigma_q|^2_g with per-mode multiplicities given by the
    sector dimensions; at the zero mode the flat directions contribute
    exact zeros. Returns the k requested eigenvalues, ascending for
    "smallest", descending start for "largest".
    """
    _require_constant(g)
    n = g.grid.n
    nsym = n * (n + 1) // 2
    dims_nonzero = {
        "all": nsym,
        "ker_div": nsym - n,
        "im_c": 1,
        "tt": nsym - n - 1,
        "scale": 0,
    }
    dims_zero = {
        "all": nsym,
        "ker_div": nsym,
        "im_c": 0,
        "tt": nsym - 1,
        "scale": 1,
    }
    if sector not in dims_nonzero:
        raise ValueError(f"unknown sector {sector!r}")
    _, _, s2, _, _ = _mode_weights(g)
    s2 = s2.reshape(-1)
    zero = s2 <= 0
    evals = []
    if dims_zero[sector]:
        evals.append(np.zeros(int(zero.sum()) * dims_zero[sector]))
    if dims_nonzero[sector]:
        evals.append(np.repeat(-s2[~zero], dims_nonzero[sector]))
    evals = np.sort(np.concatenate(evals)) if evals else np.zeros(0)
    if which == "largest":
        evals = evals[::-1]
    elif which != "smallest":
        raise ValueError("which must be 'smallest' or 'largest'")
    return evals if k is None else evals[:k]


def lichnerowicz_restricted_matrix(g, sector, kcut=2):
    """Gram and form matrices of the Lichnerowicz operator on an explicit
    low-frequency basis of a sector; the eigensolver cross-check for the
    enumerated spectrum. Returns (form, gram, fields)."""
    _require_constant(g)
    grid = g.grid
    n = grid.n
    fields = []
    if sector in ("all", "ker_div", "scale"):
        fields.append(g.mat.copy())
    if sector in ("all", "ker_div", "tt"):
        g0 = g.mat[(slice(None), slice(None)) + (0,) * n]
        ginv0 = np.linalg.inv(g0)
        for e in flat_tangent_basis(n):
            etf = e - np.einsum("ij,ij", ginv0, e) / n * g0
            if np.abs(etf).max() > 1e-12:
                fields.append(np.einsum("ij,...->ij...", etf, np.ones(grid.res)))
    it = np.ndindex(*([2 * kcut + 1] * n))
    seen = set()
    for offset in it:
        q = tuple(o - kcut for o in offset)
        if all(v == 0 for v in q) or (tuple(-v for v in q) in seen):
            continue
        seen.add(q)
        arg = sum(qq * x for qq, x in zip(q, grid.coords))
        for phase_field in (np.cos(arg), np.sin(arg)):
            if sector in ("all", "ker_div", "im_c"):
                fields.append(conformal_op(g, phase_field))
            if sector == "all":
                for j in range(n):
                    x = np.zeros((n,) + grid.res)
                    x[j] = phase_field
                    fields.append(divergence_adjoint(g, x))
    fields = _rank_filter(g, fields)
    m = len(fields)
    form = np.zeros((m, m))
    gram = np.zeros((m, m))
    images = [lichnerowicz(g, f) for f in fields]
    for a in range(m):
        for b in range(a, m):
            gram[a, b] = gram[b, a] = inner_l2(g, fields[a], fields[b])
            form[a, b] = form[b, a] = inner_l2(g, fields[a], images[b])
    return form, gram, fields


def _rank_filter(g, candidates, tol=1e-8):
    # drop candidates already spanned by the kept ones (the traceless
    # projections of the constant basis are dependent) so the Gram matrix
    # stays positive definite
    kept = []
    gram = np.zeros((0, 0))
    for f in candidates:
        nn = inner_l2(g, f, f)
        if nn <= 0:
            continue
        v = np.array([inner_l2(g, k, f) for k in kept])
        if kept:
            c = np.linalg.solve(gram, v)
            resid = nn - float(v @ c)
        else:
            resid = nn
        if resid > tol * nn:
            new = np.zeros((len(kept) + 1, len(kept) + 1))
            new[:-1, :-1] = gram
            new[:-1, -1] = new[-1, :-1] = v
            new[-1, -1] = nn
            gram = new
            kept.append(f)
    return kept


def export_tt_split(split, g, outdir, prefix="tt", empirical_c=None):
    """JSON summary plus per-component field snapshots."""
    import json
    import os
    grid = g.grid
    n = grid.n
    summary = {
        "norms": {
            "scale": norm_l2(g, split.scale),
            "conformal": norm_l2(g, split.conformal),
            "tt": norm_l2(g, split.tt),
            "kernel": norm_l2(g, split.kernel),
        },
        "kernel_dimension": n * (n + 1) // 2 - 1,
        "empirical_c": empirical_c,
        "residuals": {k: float(v) for k, v in split.residuals.items()},
    }
    path = os.path.join(outdir, f"{prefix}-split.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in ("scale", "conformal", "tt", "kernel"):
        write_field(os.path.join(outdir, f"{prefix}-{name}.lfld"),
                    grid, getattr(split, name))
    write_field(os.path.join(outdir, f"{prefix}-generator.lfld"),
                grid, split.generator)
    return path
