"""Binary snapshot format (FMF1) and deterministic CSV emission.

FMF1 layout: magic b"FMF1", u32 ds, u32 d, u64 rows, u64 cols, then
row-major little-endian float64 interleaved (re, im) pairs.
"""

import csv
import struct

import numpy as np

__all__ = ["write_fmf1", "read_fmf1", "write_csv"]

_MAGIC = b"FMF1"
_HEADER = struct.Struct("<4sIIQQ")


def write_fmf1(path, matrix: np.ndarray, ds: int, d: int):
    m = np.ascontiguousarray(np.atleast_2d(matrix), dtype=complex)
    rows, cols = m.shape
    inter = np.empty((rows, cols, 2), dtype="<f8")
    inter[..., 0] = m.real
    inter[..., 1] = m.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, ds, d, rows, cols))
        fh.write(inter.tobytes())


def read_fmf1(path):
    with open(path, "rb") as fh:
        magic, ds, d, rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an FMF1 snapshot")
        raw = np.frombuffer(fh.read(rows * cols * 16), dtype="<f8")
    raw = raw.reshape(rows, cols, 2)
    return raw[..., 0] + 1j * raw[..., 1], ds, d


def write_csv(path, columns: dict):
    """Write named columns; floats rendered with repr for bit-stable reruns."""
    names = list(columns)
    length = len(columns[names[0]])
    for name in names:
        if len(columns[name]) != length:
            raise ValueError(f"column {name!r} has mismatched length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(length):
            writer.writerow([repr(float(columns[name][i])) for name in names])
