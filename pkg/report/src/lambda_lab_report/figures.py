"""Matplotlib figures for the rendered page.

Every function takes loaded artifact data and an output directory and
returns the written file names. Text is kept as text in the SVG so the
decay annotation stays machine-readable; stored fit values are drawn as
given, never refitted.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.fonttype"] = "none"
plt.rcParams["svg.hashsalt"] = "lambda-lab-report"

_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, out, name):
    fig.savefig(out / name, **_SAVE)
    plt.close(fig)
    return name


def fig_lambda(flow, out):
    cols = flow["columns"]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(cols["t"], cols["lambda"], lw=1.2)
    ax.axhline(0.0, color="0.7", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("lambda")
    ax.set_title("eigenvalue along the flow")
    fig.tight_layout()
    return _finish(fig, out, "flow-lambda.svg")


def fig_decay(flow, out):
    cols = flow["columns"]
    summary = flow["summary"] or {}
    t = cols["t"]
    mag = np.abs(cols["lambda"])
    keep = mag > 1e-300
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.semilogy(t[keep], mag[keep], lw=1.2, label="|lambda|")
    rate = summary.get("decay_rate")
    if rate is not None and keep.any():
        t0 = t[keep][0]
        m0 = mag[keep][0]
        # guide line with the stored slope, anchored at the first kept
        # row; the stored rate is the positive decay constant
        ax.semilogy(t[keep], m0 * np.exp(-rate * (t[keep] - t0)),
                    ls="--", lw=0.9, color="0.4", label="stored fit slope")
        ax.text(0.04, 0.12, f"rate = {rate:.12g}", transform=ax.transAxes)
        r2 = summary.get("decay_r2")
        if r2 is not None:
            ax.text(0.04, 0.04, f"R^2 = {r2:.6f}", transform=ax.transAxes)
    else:
        ax.text(0.04, 0.08, "no stored fit", transform=ax.transAxes)
    ax.set_xlabel("t")
    ax.set_ylabel("|lambda|")
    ax.set_title("decay with stored fit annotation")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _finish(fig, out, "flow-decay.svg")


def fig_monitors(flow, out):
    cols = flow["columns"]
    t = cols["t"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    for name in ("rc_l2", "grad_l2f"):
        vals = cols[name]
        keep = vals > 1e-300
        ax1.semilogy(t[keep], vals[keep], lw=1.0, label=name)
    ax1.set_xlabel("t")
    ax1.set_title("curvature and gradient norms")
    ax1.legend(fontsize=8)
    for name in ("lojasiewicz_ratio", "transversality_ratio"):
        ax2.plot(t, cols[name], lw=1.0, label=name)
    ax2.set_xlabel("t")
    ax2.set_title("monitor ratios")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, out, "flow-monitors.svg")


def fig_scan(scan, out):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    for ax, key, cname in ((ax1, "ratios_b", "c_B"), (ax2, "ratios_c", "c_C")):
        ratios = np.asarray(scan.get(key, []), dtype=float)
        if ratios.size:
            ax.hist(ratios, bins=40, color="#4878a8")
        cval = scan[cname]
        ax.axvline(cval, color="#a83c3c", lw=1.2)
        ax.set_title(f"{key}, {cname} = {cval:.6g}")
    fig.suptitle(f"scan of {scan['sample_count']} samples, "
                 f"{scan['excluded_count']} below the noise floor", fontsize=9)
    fig.tight_layout()
    return _finish(fig, out, "scan-ratios.svg")


def fig_variations(rows, out):
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    methods = sorted({r["method"] for r in rows})
    for i, method in enumerate(methods):
        xs = [r["order"] + 0.12 * (i - (len(methods) - 1) / 2.0)
              for r in rows if r["method"] == method]
        ys = [max(r["cross_error"], 1e-18)
              for r in rows if r["method"] == method]
        ax.semilogy(xs, ys, ls="none", marker="o", ms=3.5, label=method)
    ax.set_xticks(sorted({r["order"] for r in rows}))
    ax.set_xlabel("order")
    ax.set_ylabel("cross-route disagreement")
    ax.set_title("variation route agreement")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, out, "variations-cross.svg")
