"""Readers for the published wavefocus artifact formats.

This package deliberately reimplements the readers against the documented
formats (report JSON, per-k norms CSV, WFOC1 field container, x/y/value
CSV slices) instead of importing the solver package, so figures can be
produced anywhere the artifacts land.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"WFOC1"
_HEADER = struct.Struct("<5sBq")


class ArtifactError(Exception):
    """Missing or malformed input artifact."""


def read_field(path) -> tuple[np.ndarray, int]:
    """WFOC1 container -> (array indexed (x, y[, z]), time index)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise ArtifactError(f"{path}: truncated header")
    magic, ndim, time_index = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ArtifactError(f"{path}: bad magic {magic!r}")
    if not (1 <= ndim <= 4):
        raise ArtifactError(f"{path}: bad rank {ndim}")
    off = _HEADER.size
    if len(raw) < off + 8 * ndim:
        raise ArtifactError(f"{path}: truncated dimension block")
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    count = int(np.prod(dims))
    if len(raw) != off + 8 * count:
        raise ArtifactError(f"{path}: payload size mismatch")
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    return flat.reshape(dims).T.copy(), int(time_index)


def read_csv_slice(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x,y,value CSV -> flat coordinate/value arrays."""
    xs, ys, vs = [], [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["x", "y", "value"]:
            raise ArtifactError(f"{path}: expected 'x,y,value' header")
        for row in reader:
            if len(row) != 3:
                raise ArtifactError(f"{path}: malformed row {row}")
            xs.append(float(row[0]))
            ys.append(float(row[1]))
            vs.append(float(row[2]))
    if not vs:
        raise ArtifactError(f"{path}: no data rows")
    return np.asarray(xs), np.asarray(ys), np.asarray(vs)


def load_field_2d(path) -> tuple[np.ndarray, tuple, tuple]:
    """Load a 2D field from either container; returns (values, x, y)."""
    path = Path(path)
    if path.suffix == ".csv":
        x, y, v = read_csv_slice(path)
        xs = np.unique(x)
        ys = np.unique(y)
        grid = v.reshape(ys.size, xs.size).T  # rows iterate y slow, x fast
        return grid, xs, ys
    arr, _ = read_field(path)
    if arr.ndim != 2:
        raise ArtifactError(f"{path}: expected a 2D field, got rank {arr.ndim}")
    return arr, np.arange(arr.shape[0]), np.arange(arr.shape[1])


def read_report(path) -> dict:
    try:
        report = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot parse report {path}: {exc}") from exc
    missing = {"k_schedule", "target_norms", "suppression_norms"} - set(report)
    if missing and "mode" not in report:
        raise ArtifactError(f"{path}: not a wavefocus report")
    return report


def read_norms_csv(path):
    ks, ts, ss, rs = [], [], [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["k", "target_norm", "suppression_norm", "ratio"]:
            raise ArtifactError(f"{path}: bad norms header {header}")
        for row in reader:
            ks.append(float(row[0]))
            ts.append(float(row[1]))
            ss.append(float(row[2]))
            rs.append(None if row[3] == "" else float(row[3]))
    return ks, ts, ss, rs
