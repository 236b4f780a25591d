"""Binary field snapshots.

Layout: a little-endian header {magic "LFLD", version u32, n u32,
res u32 per axis, periods f64 per axis, component count u32} followed by
node-major float64 data (all components of node 0, then node 1, ...).
Scalars store 1 component, vectors n, symmetric 2-tensors n(n+1)/2 in
row-major upper-triangle order.
"""

import struct

import numpy as np

from .grid import PeriodicGrid, sym_pack, sym_unpack

MAGIC = b"LFLD"
VERSION = 1


def _component_view(grid, field):
    """Field as (ncomp, *res); symmetric tensors packed to the triangle."""
    n = grid.n
    if field.shape == grid.res:
        return field[np.newaxis]
    if field.shape == (n,) + grid.res:
        return field
    if field.shape == (n, n) + grid.res:
        return sym_pack(field)
    raise ValueError(f"field shape {field.shape} does not fit grid {grid.res}")


def write_field(path, grid, field):
    """Write one scalar, vector, or symmetric-tensor field."""
    comps = np.ascontiguousarray(_component_view(grid, field), dtype="<f8")
    header = MAGIC + struct.pack("<II", VERSION, grid.n)
    header += struct.pack(f"<{grid.n}I", *grid.res)
    header += struct.pack(f"<{grid.n}d", *grid.periods)
    header += struct.pack("<I", comps.shape[0])
    # node-major: grid axes first, component axis last
    data = np.moveaxis(comps, 0, -1)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data).tobytes())


def read_field(path):
    """Read a snapshot; returns (grid, field) with tensors unpacked to full shape."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError("not an LFLD file")
    off = 4
    version, n = struct.unpack_from("<II", raw, off)
    off += 8
    if version != VERSION:
        raise ValueError(f"unsupported LFLD version {version}")
    if n not in (2, 3):
        raise ValueError(f"bad dimension {n}")
    res = struct.unpack_from(f"<{n}I", raw, off)
    off += 4 * n
    periods = struct.unpack_from(f"<{n}d", raw, off)
    off += 8 * n
    (ncomp,) = struct.unpack_from("<I", raw, off)
    off += 4
    grid = PeriodicGrid(res, periods)
    count = grid.num_nodes * ncomp
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    if flat.size != count:
        raise ValueError("truncated LFLD payload")
    data = flat.reshape(grid.res + (ncomp,)).astype(np.float64)
    comps = np.moveaxis(data, -1, 0)
    if ncomp == 1:
        return grid, comps[0].copy()
    if ncomp == n:
        return grid, comps.copy()
    if ncomp == n * (n + 1) // 2:
        return grid, sym_unpack(comps, n)
    raise ValueError(f"component count {ncomp} does not fit dimension {n}")
