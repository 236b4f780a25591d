"""Ground-state machinery for H_g = -4 Delta_g + R_g.

The operator is assembled as a sparse matrix over flattened grid nodes.
It is self-adjoint in the weighted inner product <u, v> = sum(u v rho) Vh
with rho = sqrt(det g); eigenproblems are solved after conjugation by
diag(sqrt(rho)), which turns that weighted symmetry into the plain kind.
"""

import json

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lfld
from .manifold import Metric

_DENSE_CUTOFF = 5000


class GapCollapseError(RuntimeError):
    """Raised when the first spectral gap is too small to trust anything
    built on simplicity of the ground state (reduced resolvents, contour
    radii, perturbation series)."""


def shift_matrices(grid):
    """Sparse forward-shift matrices S_a, one per axis: (S_a u)_i = u_{i+1}."""
    mats = []
    for a in range(grid.n):
        na = grid.res[a]
        rows = np.arange(na)
        one = sp.csr_matrix((np.ones(na), (rows, (rows + 1) % na)), shape=(na, na))
        factors = [sp.identity(r, format="csr") for r in grid.res]
        factors[a] = one
        m = factors[0]
        for f in factors[1:]:
            m = sp.kron(m, f, format="csr")
        mats.append(m)
    return mats


def diff_matrices(grid):
    """Sparse centered-difference matrices D_a over flattened nodes."""
    out = []
    for a, s in enumerate(shift_matrices(grid)):
        out.append((s - s.T) * (0.5 / grid.h[a]))
    return out


def assemble_schrodinger(g):
    """Sparse H = -4 Delta_g + R_g over flattened nodes.

    diag(rho) @ H is symmetric, i.e. H is self-adjoint in L^2(dV_g).
    """
    grid = g.grid
    d = diff_matrices(grid)
    rho = g.sqrt_det.reshape(-1)
    lap = sp.csr_matrix((grid.num_nodes, grid.num_nodes))
    for a in range(grid.n):
        for b in range(grid.n):
            coef = rho * g.inv[a, b].reshape(-1)
            lap = lap + d[a] @ sp.diags(coef) @ d[b]
    lap = sp.diags(1.0 / rho) @ lap
    scal = g.curvature.scalar.reshape(-1)
    return (-4.0 * lap + sp.diags(scal)).tocsr()


class SpectralData:
    """Eigendata of H_g for one metric: lambda, ground state, gap, and the
    machinery to apply resolvents and the reduced resolvent.

    Immutable after construction apart from internal solver caches.
    """

    def __init__(self, g, H, evals, basis, k, gap_tol):
        grid = g.grid
        self.g = g
        self.H = H
        self.rho = g.sqrt_det.reshape(-1)
        self.node_volume = grid.node_volume
        self.lam = float(evals[0])
        self.spectrum = np.asarray(evals[:k], dtype=float)
        self.gap = float(evals[1] - evals[0])
        if self.gap <= gap_tol:
            raise GapCollapseError(
                f"spectral gap {self.gap:.3e} at or below tolerance {gap_tol:.1e}; "
                "ground state is numerically degenerate (even grids do this at "
                "flat metrics; use odd resolutions)")
        self._evals = evals
        self._basis = basis  # columns l2-orthonormal in the conjugated problem
        self._sqrt_rho = np.sqrt(self.rho)
        w = basis[:, 0] / self._sqrt_rho
        w = w / np.sqrt(grid.node_volume) / np.linalg.norm(basis[:, 0])
        if float(np.sum(w)) < 0.0:
            w = -w
        if float(w.min()) <= 0.0:
            raise RuntimeError("ground state failed positivity; eigensolve is suspect")
        self.w = w.reshape(grid.res)
        self.f = -2.0 * np.log(self.w)
        self.vol = g.volume()
        self._full_basis = basis.shape[1] == grid.num_nodes
        self._deflated_lu = None
        self._resolvent_lus = {}

    def inner(self, u, v):
        """The L^2(dV_g) pairing, bilinear (no conjugation).

        Complex inputs keep their imaginary part; contour integrands
        depend on it.
        """
        val = np.sum(u.reshape(-1) * v.reshape(-1) * self.rho) * self.node_volume
        return complex(val) if np.iscomplexobj(val) else float(val)

    def resolvent_solve(self, z, b, guard=1e-10):
        """Solve (z - H) x = b for complex z off the spectrum."""
        known = np.asarray(self._evals)
        if np.abs(z - known).min() < guard * max(1.0, float(np.abs(known).max())):
            raise ValueError(f"z = {z} too close to the spectrum")
        key = complex(z)
        lu = self._resolvent_lus.get(key)
        if lu is None:
            n = self.H.shape[0]
            m = (sp.identity(n, dtype=complex) * key - self.H).tocsc()
            lu = spla.splu(m)
            self._resolvent_lus[key] = (lu, m)
        else:
            lu, m = lu
        bf = b.reshape(-1).astype(complex)
        x = lu.solve(bf)
        resid = np.linalg.norm(m @ x - bf)
        scale = np.linalg.norm(bf)
        if scale > 0 and resid / scale > 1e-10:
            x = x + lu.solve(bf - m @ x)
            resid = np.linalg.norm(m @ x - bf)
            if resid / scale > 1e-10:
                raise RuntimeError(f"resolvent solve residual {resid / scale:.2e}")
        return x.reshape(b.shape)

    def reduced_resolvent(self, b):
        """Apply S = (lambda_1 - H)^{-1} restricted to the complement of w."""
        bf = b.reshape(-1)
        if self._full_basis:
            # u_k <u_k, b>_rho telescopes to y_k (y_k . sqrt(rho) b) / sqrt(rho)
            c = self._basis.T @ (self._sqrt_rho * bf)
            c[0] = 0.0
            denom = self.lam - self._evals
            denom[0] = 1.0
            out = (self._basis @ (c / denom)) / self._sqrt_rho
        else:
            out = self._deflated_solve(bf)
        wf = self.w.reshape(-1)
        out = out - wf * (np.sum(wf * out * self.rho) * self.node_volume)
        return out.reshape(b.shape)

    def _deflated_solve(self, bf):
        wf = self.w.reshape(-1)
        v = self.rho * wf * self.node_volume
        if self._deflated_lu is None:
            k = (sp.identity(self.H.shape[0]) * self.lam - self.H).tocsr()
            bordered = sp.bmat([[k, wf[:, None]], [v[None, :], None]], format="csc")
            self._deflated_lu = spla.splu(bordered)
        b_perp = bf - wf * float(np.sum(v * bf))
        sol = self._deflated_lu.solve(np.concatenate([b_perp, [0.0]]))
        return sol[:-1]

    def contour_integrate(self, integrand, r=None, nq=64):
        """(1/2 pi i) times the circle integral around lambda_1.

        integrand maps a complex z to a complex scalar. The trapezoid rule
        on the circle is exact for pole terms centered at lambda_1 and
        exponentially accurate for everything analytic in the annulus.
        """
        if r is None:
            r = self.gap / 4.0
        if not 0.0 < r < self.gap / 2.0:
            raise ValueError(f"contour radius {r} outside the safe annulus")
        theta = 2.0 * np.pi * np.arange(nq) / nq
        zs = self.lam + r * np.exp(1j * theta)
        total = 0.0 + 0.0j
        for t, z in zip(theta, zs):
            total += integrand(z) * np.exp(1j * t)
        return total * (r / nq)

    def eigenfield(self, idx):
        """The idx-th eigenfunction, normalized in L^2(dV_g)."""
        y = self._basis[:, idx]
        u = y / self._sqrt_rho / np.sqrt(self.node_volume) / np.linalg.norm(y)
        return u.reshape(self.g.grid.res)


def ground_state(g, k=8, dense_cutoff=None, gap_tol=1e-8, sigma0=None, v0=None):
    """Lowest eigendata of H_g as a SpectralData.

    Dense symmetric eigendecomposition (full basis, exact reduced
    resolvent by eigen-sum) up to ``dense_cutoff`` nodes; sparse
    shift-invert Lanczos above that, with the reduced resolvent served by
    a deflated bordered solve instead.
    """
    if k < 2:
        raise ValueError("need k >= 2 eigenvalues")
    grid = g.grid
    n = grid.num_nodes
    H = assemble_schrodinger(g)
    sqrt_rho = np.sqrt(g.sqrt_det.reshape(-1))
    A = sp.diags(sqrt_rho) @ H @ sp.diags(1.0 / sqrt_rho)
    A = (A + A.T) * 0.5
    cutoff = _DENSE_CUTOFF if dense_cutoff is None else dense_cutoff
    if n <= cutoff:
        evals, basis = np.linalg.eigh(A.toarray())
    else:
        scal = g.curvature.scalar
        if sigma0 is None:
            lo = float(scal.min())
            hi = float(scal.max())
            sigma0 = lo - 0.5 * (hi - lo) - 0.1
        if v0 is None:
            v0 = np.full(n, 1.0 / np.sqrt(n))
        kk = max(k, 6)
        evals, basis = spla.eigsh(A.tocsc(), k=kk, sigma=sigma0, v0=v0)
        order = np.argsort(evals)
        evals = evals[order]
        basis = basis[:, order]
    return SpectralData(g, H, evals, basis, k, gap_tol)


def pullback_shift(g, steps):
    """Pull a metric back by an exact lattice translation."""
    return Metric(g.grid, g.grid.shift(g.mat, steps))


def functional_value(g, f):
    """The energy integral(R + |Df|^2_g) e^{-f} dV_g after normalizing f
    so that integral e^{-f} dV_g = 1. Agrees with lambda at f = f_g up to
    quadrature (the discrete chain rule is not exact)."""
    from .manifold import integrate
    mass = integrate(g, np.exp(-f))
    fn = f + np.log(mass)
    df = g.grid.grad(fn)
    dens = (g.curvature.scalar
            + np.einsum("ab...,a...,b...->...", g.inv, df, df)) * np.exp(-fn)
    return integrate(g, dens)


def export_spectral(sd, outdir, prefix="spectral"):
    """JSON summary plus LFLD snapshots of w and f."""
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {
        "lambda": sd.lam,
        "spectrum": [float(v) for v in sd.spectrum],
        "gap": sd.gap,
        "vol": sd.vol,
        "f_stats": {"min": float(sd.f.min()), "max": float(sd.f.max()),
                    "mean": float(np.mean(sd.f)),
                    "l2": float(np.sqrt(np.mean(sd.f ** 2)))},
    }
    path = outdir / f"{prefix}.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    lfld.write_field(outdir / f"{prefix}-w.lfld", sd.g.grid, sd.w)
    lfld.write_field(outdir / f"{prefix}-f.lfld", sd.g.grid, sd.f)
    return path
