"""On-disk formats.

``CF2D`` / ``RF2D``
    4-byte ASCII magic, ``u32`` width, ``u32`` height (little-endian), then
    row-major little-endian ``float64`` samples. Complex samples are stored
    interleaved as ``re, im``.
``MEAS``
    4-byte magic, ``u32`` count ``N``, ``u32`` m, ``u32`` m, followed by ``N``
    complete ``RF2D`` records of size m x m.
PGM (P5)
    Binary portable graymap, 8-bit or 16-bit (big-endian) samples.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError

_HEADER = struct.Struct("<4sII")
_MEAS_HEADER = struct.Struct("<4sIII")


def _encode_field(a: np.ndarray) -> bytes:
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2D field, got shape {a.shape}")
    h, w = a.shape
    if np.iscomplexobj(a):
        body = np.ascontiguousarray(a, dtype="<c16").tobytes()
        magic = b"CF2D"
    else:
        body = np.ascontiguousarray(a, dtype="<f8").tobytes()
        magic = b"RF2D"
    return _HEADER.pack(magic, w, h) + body


def _decode_field(stream) -> np.ndarray:
    head = stream.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise OSError("truncated field header")
    magic, w, h = _HEADER.unpack(head)
    if magic == b"CF2D":
        dtype, itemsize = "<c16", 16
    elif magic == b"RF2D":
        dtype, itemsize = "<f8", 8
    else:
        raise OSError(f"unknown field magic {magic!r}")
    body = stream.read(w * h * itemsize)
    if len(body) != w * h * itemsize:
        raise OSError("truncated field payload")
    a = np.frombuffer(body, dtype=dtype).reshape(h, w)
    return a.astype(np.complex128 if magic == b"CF2D" else np.float64)


def write_field(path, a: np.ndarray) -> None:
    """Write a real or complex field as RF2D / CF2D."""
    Path(path).write_bytes(_encode_field(a))


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return _decode_field(fh)


def field_bytes(a: np.ndarray) -> bytes:
    return _encode_field(a)


def write_measurements(path, stack) -> None:
    """Write an ``(N, m, m)`` intensity stack in MEAS format."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionError(f"expected an (N, m, m) stack, got {stack.shape}")
    n, m, _ = stack.shape
    with open(path, "wb") as fh:
        fh.write(_MEAS_HEADER.pack(b"MEAS", n, m, m))
        for d in stack:
            fh.write(_encode_field(d))


def read_measurements(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_MEAS_HEADER.size)
        if len(head) != _MEAS_HEADER.size:
            raise OSError("truncated MEAS header")
        magic, n, m1, m2 = _MEAS_HEADER.unpack(head)
        if magic != b"MEAS":
            raise OSError(f"not a MEAS file (magic {magic!r})")
        out = np.empty((n, m1, m2))
        for i in range(n):
            d = _decode_field(fh)
            if d.shape != (m1, m2) or np.iscomplexobj(d):
                raise OSError(f"MEAS record {i} has wrong shape or type")
            out[i] = d
    return out


def _pgm_tokens(data: bytes):
    """Yield (token, end offset) pairs of the PGM header, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise OSError("truncated PGM header")
        yield data[start:pos], pos


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary P5 graymap. Returns ``(pixels, maxval)`` with integer pixels."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        if magic != b"P5":
            raise OSError(f"{path}: not a binary PGM (magic {magic!r})")
        w = int(next(tokens)[0])
        h = int(next(tokens)[0])
        maxval_tok, end = next(tokens)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError) as exc:
        raise OSError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval < 65536:
        raise OSError(f"{path}: invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    body = data[end + 1 : end + 1 + w * h * dtype.itemsize]
    if len(body) != w * h * dtype.itemsize:
        raise OSError(f"{path}: truncated PGM payload")
    return np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.int64), maxval


def write_pgm(path, pixels: np.ndarray, maxval: int = 65535) -> None:
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    buf = io.BytesIO()
    buf.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
    buf.write(np.clip(pixels, 0, maxval).astype(dtype).tobytes())
    Path(path).write_bytes(buf.getvalue())
