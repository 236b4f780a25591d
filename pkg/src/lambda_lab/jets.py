"""Degree-3 Taylor arithmetic in the deformation parameter.

Propagating truncated series through the whole assembly of
H_{g + eps h} = -4 Delta_{g + eps h} + R_{g + eps h} yields sparse
matrices H_0..H_3 with H(eps) = sum eps^k H_k + O(eps^4). The epsilon
derivatives of the assembled discrete operator are then exact:
H' = H_1, H''[h,h] = 2 H_2, H'''[h,h,h] = 6 H_3, with no finite
difference step in epsilon anywhere.
"""

import numpy as np
import scipy.sparse as sp

from .spectral import diff_matrices

ORDER = 4  # coefficients 0..3


class Jet:
    """Truncated series; coefficients are ndarrays of a common shape,
    None marks a structurally zero coefficient."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = list(coeffs)
        if len(c) > ORDER:
            raise ValueError("jet degree exceeds the supported order")
        c += [None] * (ORDER - len(c))
        self.c = c

    def map(self, f):
        """Apply a linear function coefficientwise."""
        return Jet([None if x is None else f(x) for x in self.c])

    def __add__(self, other):
        out = []
        for a, b in zip(self.c, other.c):
            if a is None:
                out.append(None if b is None else b)
            elif b is None:
                out.append(a)
            else:
                out.append(a + b)
        return Jet(out)

    def __sub__(self, other):
        return self + other.map(lambda x: -x)

    def scale(self, s):
        return self.map(lambda x: s * x)


def bilinear(f, a, b):
    """Jet of f(a, b) for bilinear f, truncated at the working order."""
    out = [None] * ORDER
    for i in range(ORDER):
        if a.c[i] is None:
            continue
        for j in range(ORDER - i):
            if b.c[j] is None:
                continue
            t = f(a.c[i], b.c[j])
            k = i + j
            out[k] = t if out[k] is None else out[k] + t
    return Jet(out)


def jet_mul(a, b):
    return bilinear(np.multiply, a, b)


def jet_einsum(spec, a, b):
    return bilinear(lambda x, y: np.einsum(spec, x, y), a, b)


def jet_matrix_inverse(gj, inv0):
    """Series of the pointwise matrix inverse.

    inv0 is the precomputed inverse of the order-0 coefficient; higher
    orders follow the recursion B_k = -B_0 sum_{j>=1} A_j B_{k-j}.
    """
    mm = lambda x, y: np.einsum("ab...,bc...->ac...", x, y)
    coeffs = [inv0]
    for k in range(1, ORDER):
        acc = None
        for j in range(1, k + 1):
            if gj.c[j] is None or coeffs[k - j] is None:
                continue
            t = mm(gj.c[j], coeffs[k - j])
            acc = t if acc is None else acc + t
        coeffs.append(None if acc is None else -mm(inv0, acc))
    return Jet(coeffs)


def jet_det(gj):
    """Determinant series for 2x2 or 3x3 pointwise matrices."""
    n = gj.c[0].shape[0]
    e = lambda i, j: Jet([None if c is None else c[i, j] for c in gj.c])
    if n == 2:
        return jet_mul(e(0, 0), e(1, 1)) - jet_mul(e(0, 1), e(1, 0))
    m = lambda i, j, k, l: jet_mul(e(i, j), e(k, l))
    c00 = m(1, 1, 2, 2) - m(1, 2, 2, 1)
    c01 = m(1, 0, 2, 2) - m(1, 2, 2, 0)
    c02 = m(1, 0, 2, 1) - m(1, 1, 2, 0)
    return (jet_mul(e(0, 0), c00) - jet_mul(e(0, 1), c01)) + jet_mul(e(0, 2), c02)


def jet_sqrt(dj, s0):
    """Square-root series given the order-0 root s0 = sqrt(dj.c[0])."""
    coeffs = [s0]
    for k in range(1, ORDER):
        acc = dj.c[k]
        acc = np.zeros_like(s0) if acc is None else acc.copy()
        for j in range(1, k):
            if coeffs[j] is None or coeffs[k - j] is None:
                continue
            acc -= coeffs[j] * coeffs[k - j]
        coeffs.append(acc / (2.0 * s0))
    return Jet(coeffs)


def jet_reciprocal(sj):
    r0 = 1.0 / sj.c[0]
    coeffs = [r0]
    for k in range(1, ORDER):
        acc = None
        for j in range(1, k + 1):
            if sj.c[j] is None or coeffs[k - j] is None:
                continue
            t = sj.c[j] * coeffs[k - j]
            acc = t if acc is None else acc + t
        coeffs.append(None if acc is None else -r0 * acc)
    return Jet(coeffs)


def _diff_jet(grid, tj, axis):
    return tj.map(lambda x: grid.diff(x, axis))


def scalar_curvature_jet(g, gj, ginv_j):
    """Series of the scalar curvature along g + eps h."""
    grid = g.grid
    dg = [_diff_jet(grid, gj, a) for a in range(grid.n)]
    # s_{ijl} = D_i g_{jl} + D_j g_{il} - D_l g_{ij}, assembled per coefficient
    def stack(js):
        out = []
        for k in range(ORDER):
            if all(j.c[k] is None for j in js):
                out.append(None)
            else:
                zero = next(j.c[k] for j in js if j.c[k] is not None) * 0.0
                out.append(np.stack([zero if j.c[k] is None else j.c[k] for j in js]))
        return Jet(out)

    dgj = stack(dg)  # [a, i, j] = D_a g_{ij}
    sj = dgj + dgj.map(lambda x: np.einsum("jil...->ijl...", x)) \
        - dgj.map(lambda x: np.einsum("lij...->ijl...", x))
    gam = jet_einsum("kl...,ijl...->kij...", ginv_j, sj).scale(0.5)
    dgam = stack([_diff_jet(grid, gam, a) for a in range(grid.n)])  # [m, r, n, s]
    riem_up = (dgam.map(lambda x: np.einsum("mrns...->rsmn...", x))
               - dgam.map(lambda x: np.einsum("nrms...->rsmn...", x))
               + jet_einsum("rml...,lns...->rsmn...", gam, gam)
               - jet_einsum("rnl...,lms...->rsmn...", gam, gam))
    ricci = riem_up.map(lambda x: np.einsum("asan...->sn...", x))
    return jet_einsum("sn...,sn...->...", ginv_j, ricci)


def schrodinger_jets(g, h):
    """Sparse operator coefficients H_0..H_3 of H_{g + eps h}.

    H_0 reproduces the plain assembly of H_g to round-off; H_1..H_3 are
    its exact epsilon derivatives divided by k factorial.
    """
    grid = g.grid
    h = 0.5 * (h + np.swapaxes(h, 0, 1))
    gj = Jet([g.mat, h])
    ginv_j = jet_matrix_inverse(gj, g.inv)
    det_j = jet_det(gj)
    rho_j = jet_sqrt(det_j, g.sqrt_det)
    invrho_j = jet_reciprocal(rho_j)
    scal_j = scalar_curvature_jet(g, gj, ginv_j)

    d = diff_matrices(grid)
    nn = grid.num_nodes
    p_j = bilinear(np.multiply, rho_j.map(lambda x: x[np.newaxis, np.newaxis]),
                   ginv_j)  # rho g^{ab}, series
    inner = []
    for k in range(ORDER):
        if p_j.c[k] is None:
            inner.append(None)
            continue
        acc = sp.csr_matrix((nn, nn))
        for a in range(grid.n):
            for b in range(grid.n):
                acc = acc + d[a] @ sp.diags(p_j.c[k][a, b].reshape(-1)) @ d[b]
        inner.append(acc)
    lap = [None] * ORDER
    for i in range(ORDER):
        if invrho_j.c[i] is None:
            continue
        di = sp.diags(invrho_j.c[i].reshape(-1))
        for j in range(ORDER - i):
            if inner[j] is None:
                continue
            k = i + j
            t = di @ inner[j]
            lap[k] = t if lap[k] is None else lap[k] + t
    out = []
    for k in range(ORDER):
        m = sp.csr_matrix((nn, nn)) if lap[k] is None else (-4.0 * lap[k])
        if scal_j.c[k] is not None:
            m = m + sp.diags(scal_j.c[k].reshape(-1))
        out.append(m.tocsr())
    return out


def operator_derivatives(g, h):
    """(H1, H2x2, H3x6): the operators H'[h], H''[h,h], H'''[h,h,h]."""
    hj = schrodinger_jets(g, h)
    return hj[1], 2.0 * hj[2], 6.0 * hj[3]


def mixed_second(g, h, k):
    """Polarized H''[h, k] from the quadratic coefficients of h +- k."""
    plus = schrodinger_jets(g, h + k)[2]
    minus = schrodinger_jets(g, h - k)[2]
    return (plus - minus) * 0.5
