"""Portable FloatMap (PFM) reader/writer, grayscale variant.

Layout: the magic line ``Pf\\n``, a dimension line ``<width> <height>\\n``,
a scale line whose sign encodes endianness (we always write ``-1.0\\n``,
little-endian), then width*height 32-bit floats, bottom row first.
Round-trips are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PfmError(ValueError):
    pass


def write_pfm(path: str | Path, grid: np.ndarray) -> None:
    """Write a 2-D float array as grayscale PFM (little-endian)."""
    if grid.ndim != 2:
        raise PfmError("PFM payload must be a 2-D array")
    h, w = grid.shape
    data = np.ascontiguousarray(np.flipud(grid).astype("<f4"))
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data.tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a grayscale PFM into a float32 array of shape (h, w)."""
    with open(path, "rb") as f:
        raw = f.read()

    try:
        magic, rest = raw.split(b"\n", 1)
        dims, rest = rest.split(b"\n", 1)
        scale_line, payload = rest.split(b"\n", 1)
    except ValueError:
        raise PfmError(f"{path}: truncated PFM header")
    if magic != b"Pf":
        raise PfmError(f"{path}: not a grayscale PFM (magic {magic!r})")
    try:
        w, h = (int(t) for t in dims.split())
        scale = float(scale_line)
    except ValueError:
        raise PfmError(f"{path}: malformed PFM header")
    if w < 1 or h < 1:
        raise PfmError(f"{path}: bad dimensions {w}x{h}")
    if scale == 0:
        raise PfmError(f"{path}: zero scale")

    dtype = "<f4" if scale < 0 else ">f4"
    expected = w * h * 4
    if len(payload) != expected:
        raise PfmError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    grid = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return np.flipud(grid).astype(np.float32)


def pack_pfm_bytes(grid: np.ndarray) -> bytes:
    """Serialize like write_pfm but to memory (used by tests and the CLI)."""
    h, w = grid.shape
    data = np.ascontiguousarray(np.flipud(grid).astype("<f4")).tobytes()
    return b"Pf\n" + f"{w} {h}\n".encode("ascii") + b"-1.0\n" + data
