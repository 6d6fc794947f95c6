"""Minimal binary PGM (P5) reader and writer."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def _tokens(data: bytes, count: int):
    """Yield ``count`` header tokens and the offset of the raster."""
    pos, out = 0, []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("header: truncated PGM header")
        out.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def read_pgm(path):
    """Return ``(pixels, maxval)``; pixels has shape (height, width)."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"magic: expected P5, got {data[:2]!r} in {path}")
    fields, offset = _tokens(data, 4)
    names = ("width", "height", "maxval")
    values = []
    for name, tok in zip(names, fields[1:]):
        try:
            values.append(int(tok))
        except ValueError:
            raise FormatError(f"{name}: not an integer ({tok!r}) in {path}") from None
    width, height, maxval = values
    if width < 1 or height < 1:
        raise FormatError(f"width/height: non-positive size {width}x{height} in {path}")
    if not 0 < maxval < 65536:
        raise FormatError(f"maxval: {maxval} out of range in {path}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise FormatError(f"raster: expected {need} bytes, found {len(raster)} in {path}")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return pixels.astype(np.int64), maxval


def write_pgm(path, pixels, maxval=255):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise FormatError(f"pixels: expected a 2D array, got shape {pixels.shape}")
    if pixels.min() < 0 or pixels.max() > maxval:
        raise FormatError(f"pixels: values outside [0, {maxval}]")
    h, w = pixels.shape
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(dtype).tobytes())


def to_8bit(values):
    """Map values in [0, 1] to rounded 0..255 integers."""
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
