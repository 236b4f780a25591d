"""Ricci-DeTurck flow with live monotonicity and inequality monitors.

The integrator is explicit RK4 on d/dt g = -2 Rc(g) + L_W g, with W the
DeTurck correction against a fixed flat background. Every monitor row
records the eigenvalue, gradient and curvature norms, distances to the
reference metric, and the ratio diagnostics; the derivative identity
d lambda/dt = 2 |Rc + Hess f|^2 is checked after the run with
fourth-order differences on the uniform monitor grid.
"""

from dataclasses import dataclass

import numpy as np

from .manifold import Metric, norm
from .spectral import ground_state
from .variation import gradient_field


class FlowDivergenceError(RuntimeError):
    """Flow left the validated neighborhood or lost positivity."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


@dataclass
class FlowConfig:
    initial: Metric
    background: Metric
    dt: float = None
    t_max: float = 20.0
    monitor_every: int = 10
    snapshot_every: int = None
    kappa: float = 0.2
    conv_rc: float = 1e-8
    conv_lam: float = 1e-12
    sustain: int = 10
    ball_c2: float = 1.0
    plain_ricci: bool = False
    seed: int = -1

    def __post_init__(self):
        bound = step_bound(self.initial, self.kappa)
        if self.dt is None:
            self.dt = bound
        if self.dt <= 0.0:
            raise ValueError("time step must be positive")
        if self.dt > bound * (1.0 + 1e-12):
            raise ValueError(f"dt {self.dt:.3e} above stability bound {bound:.3e}")


@dataclass
class FlowRow:
    t: float
    lam: float
    rc_l2: float
    grad_l2f: float
    dist_c0: float
    dist_c2: float
    lojasiewicz_ratio: float
    transversality_ratio: float
    dlambda_dt_fd: float
    two_grad_sq: float


CSV_COLUMNS = ["t", "lambda", "rc_l2", "grad_l2f", "dist_c0", "dist_c2",
               "lojasiewicz_ratio", "transversality_ratio",
               "dlambda_dt_fd", "two_grad_sq"]


class FlowRecord:
    """Append-only monitor series of one flow run."""

    def __init__(self, config):
        self.config = config
        self.rows = []
        self.rc_c0 = []
        self.grad_l2f_ricci = []
        self.snapshots = []
        self.converged = False
        self.diverged = False
        self.steps = 0
        self.final_metric = None

    def column(self, name):
        key = "lam" if name == "lambda" else name
        return np.array([getattr(r, key) for r in self.rows])

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([repr(float(v)) for v in (
                    r.t, r.lam, r.rc_l2, r.grad_l2f, r.dist_c0, r.dist_c2,
                    r.lojasiewicz_ratio, r.transversality_ratio,
                    r.dlambda_dt_fd, r.two_grad_sq)])

    def summary(self):
        fit = fit_exponential(self)
        ident = monitor_identity_check(self)
        out = {
            "converged": self.converged,
            "diverged": self.diverged,
            "steps": self.steps,
            "rows": len(self.rows),
            "t_final": self.rows[-1].t if self.rows else 0.0,
            "lambda_final": self.rows[-1].lam if self.rows else None,
            "rc_final": self.rows[-1].rc_l2 if self.rows else None,
            "decay_rate": fit["rate"],
            "decay_r2": fit["r2"],
            "identity_worst_rel": ident["worst_rel"],
            "identity_rows_checked": ident["checked"],
            "curvature_bound_constant": self.curvature_bound_constant(),
            "lambda_monotone": bool(np.all(np.diff(self.column("lambda")) > -1e-8)),
        }
        return out

    def curvature_bound_constant(self):
        if not self.rc_c0 or self.rc_c0[0] <= 1e-300:
            return None
        return float(max(self.rc_c0) / self.rc_c0[0])


def step_bound(g, kappa=0.2):
    """Parabolic step restriction kappa * h_min^2 / max eigenvalue of g^{ij}."""
    nodes = np.moveaxis(g.inv, (0, 1), (-2, -1))
    max_eig = float(np.linalg.eigvalsh(nodes)[..., -1].max())
    return kappa * min(g.grid.h) ** 2 / max_eig


def deturck_vector(g, background):
    """W^k = g^{ab}(Gamma^k_ab - background Gamma^k_ab)."""
    gam = g.christoffel
    gam_ref = background.christoffel
    return np.einsum("ab...,kab...->k...", g.inv, gam - gam_ref)


def _lie_derivative_metric(grid, mat, w):
    dg = np.stack([grid.diff(mat, a) for a in range(grid.n)])
    dw = np.stack([grid.grad(w[k]) for k in range(grid.n)])  # [k, i] = D_i w^k
    return (np.einsum("a...,aij...->ij...", w, dg)
            + np.einsum("aj...,ai...->ij...", mat, dw)
            + np.einsum("ia...,aj...->ij...", mat, dw))


def flow_rhs(g, background, plain=False):
    """-2 Rc + L_W g (or plain -2 Rc for the gauge-soundness check)."""
    rc = g.curvature.ricci
    if plain:
        return -2.0 * rc
    w = deturck_vector(g, background)
    return -2.0 * rc + _lie_derivative_metric(g.grid, g.mat, w)


def deturck_step(g, background, dt, plain=False):
    """One RK4 step; raises FlowDivergenceError on positivity loss."""
    grid = g.grid

    def rhs(mat):
        return flow_rhs(Metric(grid, mat), background, plain=plain)

    try:
        k1 = rhs(g.mat)
        k2 = rhs(g.mat + 0.5 * dt * k1)
        k3 = rhs(g.mat + 0.5 * dt * k2)
        k4 = rhs(g.mat + dt * k3)
        return Metric(grid, g.mat + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    except ValueError as exc:
        raise FlowDivergenceError(f"positivity loss during step: {exc}") from exc


def _monitor(record, g, t):
    cfg = record.config
    sd = ground_state(g, k=4)
    grad, diag = gradient_field(g, sd)
    lam = sd.lam
    rc_l2 = diag["ricci_l2"]
    grad_f = diag["grad_l2f"]
    diff = g.mat - cfg.background.mat
    loj = grad_f / np.sqrt(abs(lam)) if abs(lam) > 1e-10 else float("nan")
    trans = grad_f / rc_l2 if rc_l2 > 1e-10 else float("nan")
    row = FlowRow(
        t=t, lam=lam, rc_l2=rc_l2, grad_l2f=grad_f,
        dist_c0=norm(g, diff, "C0"), dist_c2=norm(g, diff, "C2"),
        lojasiewicz_ratio=loj, transversality_ratio=trans,
        dlambda_dt_fd=float("nan"), two_grad_sq=2.0 * grad_f ** 2,
    )
    record.rows.append(row)
    record.rc_c0.append(norm(g, g.curvature.ricci, "C0"))
    record.grad_l2f_ricci.append(diag["ricci_l2f"])
    return row


# 5-point fourth-order first-derivative stencils, offsets relative to the
# evaluation row: fully one-sided, once-shifted, centered, and mirrored.
_D1_STENCILS = {
    0: ((0, 1, 2, 3, 4), (-25.0, 48.0, -36.0, 16.0, -3.0)),
    1: ((-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0)),
    2: ((-2, -1, 0, 1, 2), (1.0, -8.0, 0.0, 8.0, -1.0)),
    3: ((-3, -2, -1, 0, 1), (-1.0, 6.0, -18.0, 10.0, 3.0)),
    4: ((-4, -3, -2, -1, 0), (3.0, -16.0, 36.0, -48.0, 25.0)),
}


def _fill_dlambda(record):
    rows = record.rows
    m = len(rows)
    if m < 2:
        return
    ts = record.column("t")
    ls = record.column("lambda")
    if m < 5:
        d = np.gradient(ls, ts)
        for r, v in zip(rows, d):
            r.dlambda_dt_fd = float(v)
        return
    step = ts[1] - ts[0]
    for i in range(m):
        kind = min(i, 2) if i < m - 2 else 2 + (i - (m - 3))
        offsets, coeffs = _D1_STENCILS[kind]
        val = sum(c * ls[i + o] for o, c in zip(offsets, coeffs)) / (12.0 * step)
        rows[i].dlambda_dt_fd = float(val)


def run_flow(config):
    """Integrate to convergence, t_max, or divergence.

    Convergence means rc and |lambda| both below their tolerances for
    `sustain` consecutive monitor rows; a first row already below both
    stops immediately (exact fixed point, nothing to integrate).
    """
    g = config.initial
    record = FlowRecord(config)
    t = 0.0
    quiet = 0
    step = 0
    while True:
        if step % config.monitor_every == 0:
            row = _monitor(record, g, t)
            if row.dist_c2 > config.ball_c2:
                record.diverged = True
                _fill_dlambda(record)
                record.final_metric = g
                record.steps = step
                raise FlowDivergenceError(
                    f"left the C2 ball at t={t:.4f}", record=record)
            if row.rc_l2 < config.conv_rc and abs(row.lam) < config.conv_lam:
                quiet += 1
            else:
                quiet = 0
            if quiet >= config.sustain or (quiet == 1 and len(record.rows) == 1):
                record.converged = True
                break
        if config.snapshot_every and step % config.snapshot_every == 0:
            record.snapshots.append((t, g.mat.copy()))
        if t >= config.t_max:
            break
        g = deturck_step(g, config.background, config.dt,
                         plain=config.plain_ricci)
        t += config.dt
        step += 1
    record.final_metric = g
    record.steps = step
    _fill_dlambda(record)
    return record


def fit_exponential(record, floor=1e-12):
    """Log-linear fit of |lambda(t)|; returns {rate, r2, rows_used}."""
    ts = record.column("t")
    ls = np.abs(record.column("lambda"))
    mask = ls > floor
    if mask.sum() < 3:
        return {"rate": None, "r2": None, "rows_used": int(mask.sum())}
    x, y = ts[mask], np.log(ls[mask])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"rate": float(-slope), "r2": float(r2), "rows_used": int(mask.sum())}


def monitor_identity_check(record, rel_tol=1e-3, lam_floor=1e-8):
    """FD d lambda/dt against 2 |Rc + Hess f|^2 per monitor row.

    Rows with |lambda| below lam_floor sit at eigensolver noise where a
    relative comparison is meaningless; they are counted but not checked.
    """
    worst = 0.0
    checked = 0
    for r in record.rows:
        if not np.isfinite(r.dlambda_dt_fd) or abs(r.lam) < lam_floor:
            continue
        if r.two_grad_sq <= 0:
            continue
        rel = abs(r.dlambda_dt_fd - r.two_grad_sq) / r.two_grad_sq
        worst = max(worst, rel)
        checked += 1
    return {"worst_rel": worst if checked else None, "checked": checked,
            "total": len(record.rows), "ok": (worst <= rel_tol) if checked else True}


def perelman_inequality_check(record, slack=1e-8):
    """dlambda/dt >= (2/n) lambda^2 - slack on every checkable row."""
    n = record.config.initial.grid.n
    worst = np.inf
    for r in record.rows:
        if not np.isfinite(r.dlambda_dt_fd):
            continue
        worst = min(worst, r.dlambda_dt_fd - (2.0 / n) * r.lam ** 2)
    return {"worst_margin": float(worst), "ok": bool(worst >= -slack)}


def energy_distance_check(record, c1c2, lam_floor=1e-8):
    """Integral of |Rc| over [t1,t2] against C1 C2 (sqrt|l(t1)| - sqrt|l(t2)|)
    over monitor pairs; reports the worst margin (rhs - lhs).

    Pairs where either eigenvalue sits below lam_floor are skipped: in the
    converged tail lambda is pure solver noise (order 1e-12), so its square
    root contributes order 1e-6 jitter to the rhs that has nothing to do
    with the inequality being monitored.
    """
    ts = record.column("t")
    rc = record.column("rc_l2")
    lam = np.abs(record.column("lambda"))
    sq = np.sqrt(lam)
    cum = np.zeros(len(ts))
    for i in range(1, len(ts)):
        cum[i] = cum[i - 1] + 0.5 * (rc[i] + rc[i - 1]) * (ts[i] - ts[i - 1])
    worst = np.inf
    pairs = 0
    total = 0
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            total += 1
            if lam[i] < lam_floor or lam[j] < lam_floor:
                continue
            margin = c1c2 * (sq[i] - sq[j]) - (cum[j] - cum[i])
            worst = min(worst, margin)
            pairs += 1
    if pairs == 0:
        return {"worst_margin": None, "pairs": 0, "total_pairs": total,
                "ok": True}
    return {"worst_margin": float(worst), "pairs": pairs,
            "total_pairs": total, "ok": bool(worst >= -1e-12)}


def exponential_decay_check(record, c1, floor=1e-8):
    """|lambda(t2)| <= exp(-2(t2-t1)/C1^2) |lambda(t1)| over all pairs.

    The floor mirrors energy_distance_check: rows whose eigenvalue is
    solver noise are skipped as pair starts, and pairs whose bound decays
    under the floor stop constraining (the flow has reached the critical
    set there)."""
    ts = record.column("t")
    ls = np.abs(record.column("lambda"))
    worst = 0.0
    for i in range(len(ts)):
        if ls[i] < floor:
            continue
        for j in range(i + 1, len(ts)):
            bound = np.exp(-2.0 * (ts[j] - ts[i]) / c1 ** 2) * ls[i]
            if bound < floor:
                continue
            worst = max(worst, ls[j] / bound)
    return {"worst_ratio": float(worst), "ok": bool(worst <= 1.0 + 1e-9)}


def _flat_distance(g):
    flat_axes = tuple(range(2, 2 + g.grid.n))
    mean = g.mat.mean(axis=flat_axes, keepdims=True)
    return norm(g, g.mat - mean, "C0")


def stability_experiment(grid, amplitudes, modes, t_max=20.0, monitor_every=10):
    """Run the flow from a family of perturbed starts; every run must
    converge to some flat metric (not necessarily the round one)."""
    background = Metric.flat(grid)
    results = []
    for mode in modes:
        direction = _mode_direction(grid, background, mode)
        direction /= norm(background, direction, "C2")
        for amp in amplitudes:
            g0 = Metric(grid, background.mat + amp * direction)
            config = FlowConfig(initial=g0, background=background,
                                t_max=t_max, monitor_every=monitor_every)
            record = run_flow(config)
            fit = fit_exponential(record)
            results.append({
                "mode": mode, "amplitude": amp,
                "converged": record.converged,
                "steps": record.steps,
                "final_rc": record.rows[-1].rc_l2,
                "final_lambda": record.rows[-1].lam,
                "flat_distance_c0": _flat_distance(record.final_metric),
                "distance_to_start_background": norm(
                    background, record.final_metric.mat - background.mat, "C0"),
                "decay_rate": fit["rate"], "decay_r2": fit["r2"],
            })
    return results


def _mode_direction(grid, background, mode):
    from .decomp import conformal_op
    kind = mode.get("kind", "conformal")
    if kind == "conformal":
        k = mode.get("k", [1] + [0] * (grid.n - 1))
        arg = sum(kk * x for kk, x in zip(k, grid.coords))
        return conformal_op(background, np.cos(arg))
    if kind == "tt":
        e = np.zeros((grid.n, grid.n))
        e[0, 0], e[1, 1] = 1.0, -1.0
        return np.einsum("ij,...->ij...", e, np.ones(grid.res))
    raise ValueError(f"unknown mode kind {kind!r}")


def lojasiewicz_scan(grid, n_samples=500, seed=42, radius_range=(0.005, 0.05),
                     noise_floor=1e-8):
    """Empirical Lojasiewicz and transversality constants over ball samples.

    Every tenth sample is drawn pure-gauge and another tenth pure-flat to
    exercise the degenerate corners; flat samples fall below the noise
    floor and land in the excluded count. The floor sits well above the
    eigenvalue discretization noise of pure-gauge samples (measured up to
    3e-10 on the supported grids); a lower floor lets noise-scale
    eigenvalues into the b-ratios and destabilizes the reported minimum
    between grids.

    A further tenth is drawn as a pure unit-frequency conformal mode.
    That is the slowest direction in the neighborhood (b-ratio near 0.98
    versus 1.8 and up for band-limited mixtures), and it is the direction
    relaxation flows actually follow, so minima that omit it are useless
    as flow-side constants.

    Besides the pinned report keys, the result carries the per-sample
    weighted pairing <Hess f, Rc + Hess f> and the plain Ricci norm for
    all samples, including the degenerate ones.
    """
    from dataclasses import replace

    from .sampling import ball_metric, draw_mixture, lowest_conformal_modes
    rng = np.random.default_rng(seed)
    ratios_b, ratios_c = [], []
    orth_abs, ricci_l2, lambda_abs, grad_l2f = [], [], [], []
    excluded = 0
    ordering_failures = 0
    for s in range(n_samples):
        pure = "gauge" if s % 10 == 3 else ("flat" if s % 10 == 7 else None)
        rec = draw_mixture(rng, grid.n, radius_range, pure=pure)
        if s % 10 == 1:
            rec = replace(rec, weights=np.array([0.0, 1.0, 0.0, 0.0]),
                          conf=lowest_conformal_modes(rng, grid.n))
        g, _, _ = ball_metric(grid, rec)
        sd = ground_state(g, k=4)
        _, diag = gradient_field(g, sd)
        if diag["grad_l2f"] > diag["ricci_l2f"] + 1e-8:
            ordering_failures += 1
        orth_abs.append(abs(float(diag["orthogonality"])))
        ricci_l2.append(float(diag["ricci_l2"]))
        lambda_abs.append(abs(float(sd.lam)))
        grad_l2f.append(float(diag["grad_l2f"]))
        lam = sd.lam
        rc = diag["ricci_l2"]
        used = False
        if abs(lam) >= noise_floor:
            ratios_b.append(diag["grad_l2f"] / np.sqrt(abs(lam)))
            used = True
        if rc >= noise_floor:
            ratios_c.append(diag["grad_l2f"] / rc)
            used = True
        if not used:
            excluded += 1
    return {
        "c_B": float(min(ratios_b)) if ratios_b else None,
        "c_C": float(min(ratios_c)) if ratios_c else None,
        "sample_count": n_samples,
        "seed": seed,
        "excluded_count": excluded,
        "ordering_failures": ordering_failures,
        "ratios_b": [float(v) for v in ratios_b],
        "ratios_c": [float(v) for v in ratios_c],
        "orthogonality": orth_abs,
        "ricci_l2": ricci_l2,
        "lambda_abs": lambda_abs,
        "grad_l2f": grad_l2f,
        "grid_res": list(grid.res),
    }


def probe_positive_lambda(grid, n_samples=100, seed=7, radius_range=(0.005, 0.05),
                          threshold=1e-10):
    """Search the sampled neighborhood for a start with lambda above noise.

    None should exist near the flat torus; the probe documents that the
    positive-eigenvalue ancient-solution mechanism has no entry point
    here.
    """
    from .sampling import ball_metric, draw_mixture
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_samples):
        rec = draw_mixture(rng, grid.n, radius_range)
        g, _, _ = ball_metric(grid, rec)
        worst = max(worst, ground_state(g, k=4).lam)
    return {"found": bool(worst > threshold), "max_lambda": float(worst),
            "n_samples": n_samples, "seed": seed}
