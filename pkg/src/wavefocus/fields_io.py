"""On-disk artifact formats.

Field files ("WFOC1"): a small self-describing binary container for
float64 arrays.  Header layout (little endian):

    bytes 0..4   magic "WFOC1"
    byte  5      ndim (uint8)
    bytes 6..13  time index (int64; -1 when not applicable)
    then ndim * uint64 dimension sizes, slowest to fastest

followed by the raw float64 payload in that axis order.  Spatial arrays
are indexed (x, y[, z]) in memory and written with axes reversed, so the
file runs z, y, x from slowest to fastest; a 2x2 field [[1, 2], [3, 4]]
(value[x, y]) therefore serializes to the 32-byte payload 1.0, 3.0, 2.0,
4.0.  Reading reverses the axes back.

CSV alternatives: 2D field slices as "x,y,value" rows; per-k localization
norms as "k,target_norm,suppression_norm,ratio" rows.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"WFOC1"
_HEADER = struct.Struct("<5sBq")


def write_field(path, arr: np.ndarray, time_index: int = -1) -> None:
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim < 1 or arr.ndim > 4:
        raise FormatError(f"unsupported array rank {arr.ndim}")
    transposed = np.ascontiguousarray(arr.T)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.ndim, int(time_index)))
        fh.write(struct.pack(f"<{arr.ndim}Q", *transposed.shape))
        fh.write(transposed.tobytes())


def read_field(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, ndim, time_index = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if not (1 <= ndim <= 4):
        raise FormatError(f"{path}: bad rank {ndim}")
    off = _HEADER.size
    if len(raw) < off + 8 * ndim:
        raise FormatError(f"{path}: truncated dimension block")
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    count = int(np.prod(dims))
    expected = off + 8 * count
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload size {len(raw) - off} != expected {8 * count}"
        )
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    return flat.reshape(dims).T.copy(), int(time_index)


def write_csv_slice(path, arr2d: np.ndarray, origin, h) -> None:
    """2D field as x,y,value rows (x fastest)."""
    arr2d = np.asarray(arr2d, dtype=float)
    if arr2d.ndim != 2:
        raise FormatError("csv slices are for 2D arrays")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for j in range(arr2d.shape[1]):
            y = origin[1] + j * h[1]
            for i in range(arr2d.shape[0]):
                x = origin[0] + i * h[0]
                w.writerow([repr(x), repr(y), repr(float(arr2d[i, j]))])


def read_csv_slice(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (x, y, value) flat arrays from an x,y,value CSV."""
    xs, ys, vs = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["x", "y", "value"]:
            raise FormatError(f"{path}: expected 'x,y,value' header, got {header}")
        for row in reader:
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row}")
            xs.append(float(row[0]))
            ys.append(float(row[1]))
            vs.append(float(row[2]))
    return np.asarray(xs), np.asarray(ys), np.asarray(vs)


def write_norms_csv(path, ks, target_norms, suppression_norms, ratios) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "target_norm", "suppression_norm", "ratio"])
        for k, t, s, r in zip(ks, target_norms, suppression_norms, ratios):
            w.writerow([repr(float(k)), repr(float(t)), repr(float(s)),
                        "" if r is None else repr(float(r))])


def read_norms_csv(path):
    ks, ts, ss, rs = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["k", "target_norm", "suppression_norm", "ratio"]:
            raise FormatError(f"{path}: bad norms header {header}")
        for row in reader:
            ks.append(float(row[0]))
            ts.append(float(row[1]))
            ss.append(float(row[2]))
            rs.append(None if row[3] == "" else float(row[3]))
    return ks, ts, ss, rs
