"""Minimal reader and writer for grayscale PGM (P2 ascii, P5 binary)."""

from __future__ import annotations

import re

import numpy as np

from promis.errors import RasterFormatError

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Return ``(pixels, maxval)``; ``pixels`` has shape (height, width), row 0 on top."""
    data = bytes(data)
    pos = 0
    header = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise RasterFormatError("truncated PGM header")
        header.append(m.group(1))
        pos = m.end()
    magic = header[0]
    if magic not in (b"P2", b"P5"):
        raise RasterFormatError(f"not a grayscale PGM (magic {magic[:8]!r})")
    try:
        width, height, maxval = (int(t) for t in header[1:])
    except ValueError as exc:
        raise RasterFormatError("non-numeric PGM header field") from exc
    if width <= 0 or height <= 0 or not (0 < maxval < 65536):
        raise RasterFormatError(f"invalid PGM dimensions {width}x{height} or maxval {maxval}")
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos : pos + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise RasterFormatError("truncated PGM raster")
        pixels = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < count:
            raise RasterFormatError("truncated PGM raster")
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError as exc:
            raise RasterFormatError("non-numeric PGM pixel") from exc
    if pixels.min(initial=0) < 0 or pixels.max(initial=0) > maxval:
        raise RasterFormatError("PGM pixel value exceeds maxval")
    return pixels.reshape(height, width), maxval


def write_pgm(pixels: np.ndarray, maxval: int = 255) -> bytes:
    """Encode an integer array as ascii P2."""
    pixels = np.asarray(pixels, dtype=np.int64)
    height, width = pixels.shape
    lines = [f"P2\n{width} {height}\n{maxval}"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    return ("\n".join(lines) + "\n").encode("ascii")
