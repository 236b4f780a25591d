"""Strict single-document JSON configuration.

A config file is one JSON object; unknown keys anywhere in the tree are
rejected so a typo cannot silently fall back to a default. --set
overrides use dotted paths and JSON-parsed values. Every run archives
the fully resolved document next to its results.
"""

import copy
import hashlib
import json
import os


class ConfigError(Exception):
    pass


_GRID = {"res": list, "periods": list}
_METRIC = {
    "kind": str,        # flat | conformal | gauge | tt_constant | snapshot
    "matrix": list,     # flat (constant coefficients) and tt_constant
    "modes": list,      # conformal: [{k, amp, phase}]; gauge: [{component, k, amp, phase}]
    "path": str,        # snapshot
}
_PERTURBATION = {"kind": str, "k": list, "amplitude": float}

SCHEMAS = {
    "lambda": {
        "grid": _GRID, "metric": _METRIC, "seed": int, "output_dir": str,
        "lambda": {"k": int, "dense_cutoff": int},
    },
    "variations": {
        "grid": _GRID, "metric": _METRIC, "seed": int, "output_dir": str,
        "variations": {
            "n_samples": int, "orders": list, "fd": bool,
            "base_radius": float, "include_examples": bool,
        },
    },
    "flow": {
        "grid": _GRID, "metric": _METRIC, "seed": int, "output_dir": str,
        "flow": {
            "dt": float, "t_max": float, "monitor_every": int,
            "snapshot_every": int, "kappa": float, "plain_ricci": bool,
            "perturbation": _PERTURBATION, "c1c2": float,
        },
    },
    "scan": {
        "grid": _GRID, "seed": int, "output_dir": str,
        "scan": {
            "n_samples": int, "radius": list, "noise_floor": float,
        },
    },
}

DEFAULTS = {
    "grid": {"res": [33, 33]},
    "metric": {"kind": "flat"},
    "seed": 0,
    "output_dir": "lambda-lab-out",
    "lambda": {"k": 6},
    "variations": {"n_samples": 5, "orders": [1, 2, 3], "fd": True,
                   "base_radius": 0.1, "include_examples": True},
    "flow": {"t_max": 20.0, "monitor_every": 10, "kappa": 0.2,
             "plain_ricci": False},
    "scan": {"n_samples": 500, "radius": [0.005, 0.05], "noise_floor": 1e-8},
}


def _check_keys(doc, schema, path=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"expected an object at {path or 'top level'}")
    for key, value in doc.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {where!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            _check_keys(value, expected, where)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{where!r} must be a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{where!r} must be an integer")
        elif not isinstance(value, expected):
            raise ConfigError(f"{where!r} must be {expected.__name__}")


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(doc, spec):
    if "=" not in spec:
        raise ConfigError(f"--set needs key=value, got {spec!r}")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {part!r} in {key!r}")
    node[parts[-1]] = value


def load(path, overrides, command):
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a single JSON object")
    for spec in overrides:
        _apply_override(doc, spec)
    schema = SCHEMAS[command]
    _check_keys(doc, schema)
    defaults = {k: v for k, v in DEFAULTS.items() if k in schema}
    resolved = _merge(defaults, doc)
    _validate_semantics(resolved, command)
    return resolved


def _validate_semantics(cfg, command):
    res = cfg["grid"]["res"]
    if not (isinstance(res, list) and len(res) in (2, 3)
            and all(isinstance(r, int) and r >= 8 for r in res)):
        raise ConfigError("grid.res must be 2 or 3 integers, each at least 8")
    if "metric" in cfg:
        kind = cfg["metric"].get("kind", "flat")
        if kind not in ("flat", "conformal", "gauge", "tt_constant", "snapshot"):
            raise ConfigError(f"unknown metric kind {kind!r}")
        if kind == "snapshot" and "path" not in cfg["metric"]:
            raise ConfigError("snapshot metric needs a path")


def write_resolved(cfg, outdir):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "resolved-config.json")
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_manifest(outdir):
    """Content hashes of every file in the output directory."""
    entries = {}
    for name in sorted(os.listdir(outdir)):
        if name == "manifest.json":
            continue
        full = os.path.join(outdir, name)
        if not os.path.isfile(full):
            continue
        digest = hashlib.sha256()
        with open(full, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                digest.update(chunk)
        entries[name] = {"sha256": digest.hexdigest(),
                         "bytes": os.path.getsize(full)}
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def build_grid(cfg):
    from .grid import PeriodicGrid
    spec = cfg["grid"]
    return PeriodicGrid(tuple(spec["res"]), tuple(spec.get("periods"))
                        if spec.get("periods") else None)


def build_metric(cfg, grid):
    import numpy as np
    from .manifold import Metric
    spec = cfg.get("metric", {"kind": "flat"})
    kind = spec.get("kind", "flat")
    if kind == "flat":
        if "matrix" in spec:
            return Metric.from_constant(grid, np.array(spec["matrix"], dtype=float))
        return Metric.flat(grid)
    if kind == "conformal":
        u = np.zeros(grid.res)
        for mode in spec.get("modes", []):
            arg = sum(k * x for k, x in zip(mode["k"], grid.coords))
            u += mode.get("amp", 1.0) * np.cos(arg + mode.get("phase", 0.0))
        e = np.exp(2.0 * u)
        mat = np.zeros((grid.n, grid.n) + grid.res)
        for a in range(grid.n):
            mat[a, a] = e
        return Metric(grid, mat)
    if kind == "gauge":
        from .manifold import divergence_adjoint
        x = np.zeros((grid.n,) + grid.res)
        for mode in spec.get("modes", []):
            arg = sum(k * c for k, c in zip(mode["k"], grid.coords))
            x[mode.get("component", 0)] += (mode.get("amp", 1.0)
                                            * np.cos(arg + mode.get("phase", 0.0)))
        gflat = Metric.flat(grid)
        return Metric(grid, gflat.mat + divergence_adjoint(gflat, x))
    if kind == "tt_constant":
        m = np.array(spec["matrix"], dtype=float)
        gflat = Metric.flat(grid)
        return Metric(grid, gflat.mat
                      + np.einsum("ij,...->ij...", m, np.ones(grid.res)))
    if kind == "snapshot":
        from .lfld import read_field
        snap_grid, field = read_field(spec["path"])
        if snap_grid != grid:
            raise ConfigError("snapshot grid does not match configured grid")
        return Metric(grid, field)
    raise ConfigError(f"unknown metric kind {kind!r}")
