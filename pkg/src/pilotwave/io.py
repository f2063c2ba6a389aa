"""Binary snapshots and CSV exports of grid wave functions.

Snapshot layout (little-endian)::

    magic      4 bytes   b"PWL1"
    version    uint32    1
    dims       uint32
    points     uint32 x dims
    lower      float64 x dims
    upper      float64 x dims
    boundary   uint8 x dims   (0 periodic, 1 reflecting)
    time       float64
    data       float64 pairs (re, im), row-major over the grid

The CSV export has one row per grid point with columns
``i0[,i1[,i2]],q0[,q1[,q2]],re,im``.
"""

import csv
import struct

import numpy as np

from .errors import GridError
from .grid import PERIODIC, REFLECTING, GridSpec, RealField, WaveFunction

MAGIC = b"PWL1"
VERSION = 1
_BOUNDARY_CODE = {PERIODIC: 0, REFLECTING: 1}
_CODE_BOUNDARY = {v: k for k, v in _BOUNDARY_CODE.items()}


def fmt(x):
    """Shortest round-trip float text (deterministic across runs)."""
    return repr(float(x))


def snapshot_bytes(psi):
    g = psi.grid
    d = g.dims
    head = MAGIC + struct.pack("<II", VERSION, d)
    head += struct.pack(f"<{d}I", *g.points)
    head += struct.pack(f"<{d}d", *g.lower)
    head += struct.pack(f"<{d}d", *g.upper)
    head += struct.pack(f"<{d}B", *[_BOUNDARY_CODE[b] for b in g.boundary])
    head += struct.pack("<d", psi.time)
    data = np.ascontiguousarray(psi.values, dtype="<c16").view("<f8")
    return head + data.tobytes()


def write_snapshot(path, psi):
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(psi))


def parse_snapshot(buf):
    if buf[:4] != MAGIC:
        raise GridError("not a PWL1 snapshot")
    off = 4
    version, d = struct.unpack_from("<II", buf, off)
    off += 8
    if version != VERSION:
        raise GridError(f"unsupported snapshot version {version}")
    points = struct.unpack_from(f"<{d}I", buf, off)
    off += 4 * d
    lower = struct.unpack_from(f"<{d}d", buf, off)
    off += 8 * d
    upper = struct.unpack_from(f"<{d}d", buf, off)
    off += 8 * d
    codes = struct.unpack_from(f"<{d}B", buf, off)
    off += d
    (time,) = struct.unpack_from("<d", buf, off)
    off += 8
    grid = GridSpec(lower, upper, points, [_CODE_BOUNDARY[c] for c in codes])
    count = 2 * grid.size
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    values = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return WaveFunction(grid, values, time)


def read_snapshot(path):
    with open(path, "rb") as fh:
        return parse_snapshot(fh.read())


def write_grid_csv(path, psi):
    g = psi.grid
    d = g.dims
    header = [f"i{a}" for a in range(d)] + [f"q{a}" for a in range(d)] + ["re", "im"]
    axes = [g.axis(a) for a in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for idx in np.ndindex(*g.shape):
            z = psi.values[idx]
            row = [str(i) for i in idx] + [fmt(axes[a][idx[a]]) for a in range(d)]
            w.writerow(row + [fmt(z.real), fmt(z.imag)])


def read_grid_csv(path, grid):
    """Load CSV grid data onto ``grid`` (coordinates are checked against it)."""
    values = np.zeros(grid.shape, dtype=complex)
    seen = np.zeros(grid.shape, dtype=bool)
    d = grid.dims
    axes = [grid.axis(a) for a in range(d)]
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        expected = [f"i{a}" for a in range(d)] + [f"q{a}" for a in range(d)] + ["re", "im"]
        if header != expected:
            raise GridError(f"CSV header {header} does not match a {d}-d grid")
        for row in r:
            idx = tuple(int(v) for v in row[:d])
            q = [float(v) for v in row[d:2 * d]]
            for a in range(d):
                if abs(q[a] - axes[a][idx[a]]) > 1e-9 * max(1.0, abs(q[a])):
                    raise GridError(f"CSV coordinate mismatch at index {idx}")
            values[idx] = float(row[2 * d]) + 1j * float(row[2 * d + 1])
            seen[idx] = True
    if not seen.all():
        raise GridError("CSV does not cover every grid point")
    return values


def read_potential_csv(path, grid):
    return RealField(grid, read_grid_csv(path, grid).real)
