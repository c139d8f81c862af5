"""Field serialization: CSV (quantitative record) and binary PGM (preview).

CSV files start with a ``# grid N0 N1 dx`` header followed by one line per
grid row, 17 significant digits per entry, so a write/read round trip is
bit-exact for float64.  PGM output is 8-bit binary (P5) with per-file
min-max normalization; it is a qualitative rendering only.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec

__all__ = ["write_field_csv", "read_field_csv", "write_pgm"]


def write_field_csv(path, values: np.ndarray, dx: float) -> None:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("field CSV expects a 2-D array")
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid {arr.shape[0]} {arr.shape[1]} {dx:.17g}\n")
        for row in arr:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_field_csv(path) -> tuple[np.ndarray, GridSpec]:
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[:2] != ["#", "grid"]:
            raise ValueError(f"{path}: malformed field header")
        n0, n1 = int(header[2]), int(header[3])
        dx = float(header[4])
        values = np.array(
            [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        )
    if values.shape != (n0, n1):
        raise ValueError(f"{path}: expected shape {(n0, n1)}, got {values.shape}")
    return values, GridSpec(shape=(n0, n1), dx=dx)


def write_pgm(path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("PGM expects a 2-D array")
    lo = arr.min()
    hi = arr.max()
    if hi > lo:
        scaled = np.round((arr - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(arr)
    data = scaled.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
