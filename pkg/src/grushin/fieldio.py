"""Field snapshots on disk: flat CSV and the GRSH1 binary layout.

GRSH1 layout (all little-endian)::

    b"GRSH1"                     5-byte magic
    int64 N, int64 k             block dimensions
    int64 size[0..N+k-1]         points along each axis (x axes first)
    float64 values[...]          row-major, x-major / y-minor

CSV layout: header ``i0..i{N-1},j0..j{k-1},value`` then one row per node,
x indices before y indices, rows in the same row-major order.
"""

from __future__ import annotations

import csv
import itertools
import struct
from pathlib import Path

import numpy as np

from .core import Field, Grid, InvalidFieldError

MAGIC = b"GRSH1"


def fmt(x: float) -> str:
    """Shortest round-trip decimal representation, used for every CSV number."""
    return repr(float(x))


def write_field_binary(path, field: Field):
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<2q", g.N, g.k))
        fh.write(struct.pack(f"<{len(g.shape)}q", *g.shape))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path, grid: Grid) -> Field:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise InvalidFieldError(f"{path}: not a GRSH1 file")
    N, k = struct.unpack_from("<2q", data, 5)
    shape = struct.unpack_from(f"<{N + k}q", data, 21)
    if (N, k) != (grid.N, grid.k) or tuple(shape) != grid.shape:
        raise InvalidFieldError(f"{path}: shape {shape} does not match grid {grid.shape}")
    off = 21 + 8 * (N + k)
    vals = np.frombuffer(data, dtype="<f8", offset=off)
    return Field(grid, vals.reshape(shape).astype(float))


def write_field_csv(path, field: Field):
    g = field.grid
    header = [f"i{d}" for d in range(g.N)] + [f"j{d}" for d in range(g.k)] + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        flat = field.values.ravel()
        for n, idx in enumerate(itertools.product(*(range(s) for s in g.shape))):
            w.writerow([*idx, fmt(flat[n])])


def read_field_csv(path, grid: Grid) -> Field:
    vals = np.full(grid.shape, np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "value" or len(header) != grid.N + grid.k + 1:
            raise InvalidFieldError(f"{path}: unexpected header {header}")
        for row in reader:
            vals[tuple(int(i) for i in row[:-1])] = float(row[-1])
    if np.isnan(vals).any():
        raise InvalidFieldError(f"{path}: missing nodes")
    return Field(grid, vals)


def read_field(path, grid: Grid) -> Field:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(5)
    if head == MAGIC:
        return read_field_binary(path, grid)
    return read_field_csv(path, grid)


def write_field(path, field: Field):
    if str(path).endswith(".csv"):
        write_field_csv(path, field)
    else:
        write_field_binary(path, field)
