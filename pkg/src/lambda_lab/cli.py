"""Command-line front end.

Subcommands: lambda, variations, flow, scan, report. Each numeric run
reads one JSON config, writes its results plus the resolved config and a
content-hash manifest into the configured output directory, and is
byte-for-byte reproducible for a fixed config and seed.

Exit codes: 0 success, 1 numerical failure, 2 usage or config error.

This module must not import numpy at the top level: the thread cap from
LAMBDA_LAB_THREADS has to land in the environment before numpy loads.
"""

import argparse
import json
import os
import sys


def _apply_thread_cap():
    cap = os.environ.get("LAMBDA_LAB_THREADS")
    if not cap:
        return
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _parser():
    p = argparse.ArgumentParser(
        prog="lambda-lab",
        description="eigenvalue laboratory on discretized flat tori")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("lambda", "ground state and spectrum of one metric"),
        ("variations", "variation orders 1-3 on sampled directions"),
        ("flow", "Ricci-DeTurck flow with monitors"),
        ("scan", "inequality-constant scan over metric samples"),
    ]:
        q = sub.add_parser(name, help=help_text)
        q.add_argument("--config", required=True, help="JSON config file")
        q.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, value parsed as JSON")
    r = sub.add_parser("report", help="render figures from run outputs")
    r.add_argument("rest", nargs=argparse.REMAINDER,
                   help="arguments passed through to the report tool")
    return p


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_error(outdir, exc):
    if outdir and os.path.isdir(outdir):
        _write_json(os.path.join(outdir, "error.json"),
                    {"error": type(exc).__name__, "message": str(exc)})


def cmd_lambda(cfg):
    from pathlib import Path
    from .config import build_grid, build_metric
    from .spectral import export_spectral, ground_state
    grid = build_grid(cfg)
    g = build_metric(cfg, grid)
    opts = cfg["lambda"]
    sd = ground_state(g, k=opts["k"], dense_cutoff=opts.get("dense_cutoff"))
    export_spectral(sd, Path(cfg["output_dir"]))
    return 0


def cmd_variations(cfg):
    import numpy as np
    from .config import build_grid, build_metric
    from .manifold import Metric, norm
    from .sampling import ker_div_sample, perturbation_pair
    from .spectral import ground_state
    from .variation import (export_variation_csv, first_variation,
                            second_variation, second_variation_ricci_flat,
                            third_variation)
    grid = build_grid(cfg)
    opts = cfg["variations"]
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    orders = set(opts["orders"])
    fd = opts["fd"]
    results = []
    if opts["include_examples"]:
        gflat = Metric.flat(grid)
        sd0 = ground_state(gflat, k=4)
        e = np.einsum("ij,...->ij...", np.eye(grid.n), np.ones(grid.res))
        results.append(first_variation(gflat, e, sd=sd0, g_id="flat",
                                       h_id="scale", seed=seed))
        hk = ker_div_sample(grid, rng)
        hk /= norm(gflat, hk, "C2")
        results.append(second_variation_ricci_flat(gflat, hk, g_id="flat",
                                                   h_id="ker-div", seed=seed))
        results.append(second_variation(gflat, hk, sd=sd0, fd_oracle=fd,
                                        g_id="flat", h_id="ker-div", seed=seed))
    for s in range(opts["n_samples"]):
        g, h = perturbation_pair(grid, rng, base_radius=opts["base_radius"])
        sd = ground_state(g, k=4)
        ids = {"g_id": f"pair-{s}", "h_id": f"dir-{s}", "seed": seed}
        if 1 in orders:
            results.append(first_variation(g, h, sd=sd, fd_oracle=fd, **ids))
        if 2 in orders:
            results.append(second_variation(g, h, sd=sd, fd_oracle=fd, **ids))
        if 3 in orders:
            results.append(third_variation(g, h, sd=sd, fd_oracle=fd, **ids))
    outdir = cfg["output_dir"]
    export_variation_csv(results, os.path.join(outdir, "variations.csv"))
    return 0


def cmd_flow(cfg):
    import numpy as np
    from .config import build_grid, build_metric
    from .flow import (FlowConfig, FlowDivergenceError, _mode_direction,
                       energy_distance_check, exponential_decay_check,
                       monitor_identity_check, perelman_inequality_check,
                       run_flow)
    from .lfld import write_field
    from .manifold import Metric, norm
    grid = build_grid(cfg)
    background = Metric.flat(grid)
    g0 = build_metric(cfg, grid)
    opts = cfg["flow"]
    pert = opts.get("perturbation")
    if pert:
        direction = _mode_direction(grid, background, pert)
        direction /= norm(background, direction, "C2")
        g0 = Metric(grid, g0.mat + pert.get("amplitude", 0.02) * direction)
    flow_cfg = FlowConfig(
        initial=g0, background=background, dt=opts.get("dt"),
        t_max=opts["t_max"], monitor_every=opts["monitor_every"],
        snapshot_every=opts.get("snapshot_every"), kappa=opts["kappa"],
        plain_ricci=opts["plain_ricci"], seed=cfg["seed"])
    outdir = cfg["output_dir"]
    try:
        record = run_flow(flow_cfg)
    except FlowDivergenceError as exc:
        if exc.record is not None:
            exc.record.to_csv(os.path.join(outdir, "flow.csv"))
        raise
    record.to_csv(os.path.join(outdir, "flow.csv"))
    summary = record.summary()
    summary["perelman_inequality"] = perelman_inequality_check(record)
    summary["identity"] = monitor_identity_check(record)
    c1c2 = opts.get("c1c2")
    if c1c2:
        summary["energy_distance"] = energy_distance_check(record, c1c2)
        summary["exponential_decay"] = exponential_decay_check(
            record, np.sqrt(c1c2))
    _write_json(os.path.join(outdir, "flow-summary.json"), summary)
    for t, mat in record.snapshots:
        write_field(os.path.join(outdir, f"snapshot-{t:.6f}.lfld"), grid, mat)
    return 0


def cmd_scan(cfg):
    from .config import build_grid
    from .flow import lojasiewicz_scan
    grid = build_grid(cfg)
    opts = cfg["scan"]
    report = lojasiewicz_scan(grid, n_samples=opts["n_samples"],
                              seed=cfg["seed"],
                              radius_range=tuple(opts["radius"]),
                              noise_floor=opts["noise_floor"])
    _write_json(os.path.join(cfg["output_dir"], "scan-report.json"), report)
    return 0


def cmd_report(rest):
    try:
        from lambda_lab_report.cli import main as report_main
    except ImportError:
        print("report tooling is not installed (package lambda-lab-report)",
              file=sys.stderr)
        return 2
    return report_main(rest)


def main(argv=None):
    _apply_thread_cap()
    raw = list(sys.argv[1:] if argv is None else argv)
    if raw[:1] == ["report"]:
        # argparse REMAINDER drops leading flag-like tokens, so the
        # passthrough must bypass the parser entirely
        return cmd_report(raw[1:])
    args = _parser().parse_args(raw)

    from .config import ConfigError, load, write_manifest, write_resolved
    try:
        cfg = load(args.config, args.set, command=args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    write_resolved(cfg, outdir)

    try:
        rc = {"lambda": cmd_lambda, "variations": cmd_variations,
              "flow": cmd_flow, "scan": cmd_scan}[args.command](cfg)
    except (ValueError, RuntimeError) as exc:
        # GapCollapseError and FlowDivergenceError are RuntimeErrors,
        # LinAlgError is a ValueError; all land here
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_error(outdir, exc)
        write_manifest(outdir)
        return 1
    write_manifest(outdir)
    return rc
