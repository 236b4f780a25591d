"""Loaders for the laboratory's artifact directories."""

import csv
import json
from pathlib import Path

import numpy as np

FLOW_COLUMNS = ["t", "lambda", "rc_l2", "grad_l2f", "dist_c0", "dist_c2",
                "lojasiewicz_ratio", "transversality_ratio", "dlambda_dt_fd",
                "two_grad_sq"]
VARIATION_COLUMNS = ["order", "method", "value", "cross_error", "g_id",
                     "h_id", "seed"]
SCAN_REQUIRED = {"c_B", "c_C", "sample_count", "seed", "excluded_count"}


class FormatError(ValueError):
    """An artifact does not match its documented format."""


def load_flow(dirpath):
    """Read flow.csv (and flow-summary.json when present) from a run
    directory. Returns {"columns": {name: array}, "summary": dict|None}.
    """
    dirpath = Path(dirpath)
    csv_path = dirpath / "flow.csv"
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [[float(v) for v in row] for row in reader]
    except OSError as exc:
        raise FormatError(f"cannot read {csv_path}: {exc}") from exc
    if header != FLOW_COLUMNS:
        raise FormatError(f"unexpected flow.csv header: {header}")
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    columns = {name: data[:, i] for i, name in enumerate(header)}
    summary = None
    summary_path = dirpath / "flow-summary.json"
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)
    return {"columns": columns, "summary": summary}


def load_scan(dirpath):
    path = Path(dirpath) / "scan-report.json"
    try:
        with open(path) as fh:
            report = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    missing = SCAN_REQUIRED - set(report)
    if missing:
        raise FormatError(f"scan report lacks keys: {sorted(missing)}")
    return report


def load_variations(dirpath):
    path = Path(dirpath) / "variations.csv"
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if rows and sorted(rows[0]) != sorted(VARIATION_COLUMNS):
        raise FormatError(f"unexpected variations.csv columns: {sorted(rows[0])}")
    for row in rows:
        row["order"] = int(row["order"])
        row["value"] = float(row["value"])
        row["cross_error"] = float(row["cross_error"])
    return rows
