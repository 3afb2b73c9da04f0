"""File formats used by the command line tools.

Binary arrays (complex or real) start with a 16-byte header::

    bytes 0-3    magic, b"FNC1" (complex) or b"FNR1" (real)
    bytes 4-7    uint32 LE, number of dimensions (1 or 2)
    bytes 8-11   uint32 LE, first dimension
    bytes 12-15  uint32 LE, second dimension (1 for vectors)

followed by little-endian float64 values in C order. Complex data store
real and imaginary parts interleaved.

Images are binary PGM (``P5``) with maxval 255 or 65535; 16-bit samples are
big-endian as the format requires.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "write_complex",
    "read_complex",
    "write_real",
    "read_real",
    "write_pgm",
    "read_pgm",
    "write_json",
    "read_json",
    "MAGIC_COMPLEX",
    "MAGIC_REAL",
]

MAGIC_COMPLEX = b"FNC1"
MAGIC_REAL = b"FNR1"


def _header(magic: bytes, shape) -> bytes:
    if len(shape) not in (1, 2):
        raise ValueError("only 1-D and 2-D arrays are supported")
    d0 = shape[0]
    d1 = shape[1] if len(shape) == 2 else 1
    return magic + struct.pack("<III", len(shape), d0, d1)


def _read_header(buf: bytes, magic: bytes):
    if len(buf) < 16 or buf[:4] != magic:
        raise ValueError(f"not a {magic.decode()} file")
    ndim, d0, d1 = struct.unpack("<III", buf[4:16])
    if ndim not in (1, 2):
        raise ValueError(f"bad dimension count {ndim}")
    return (d0,) if ndim == 1 else (d0, d1)


def write_complex(path, a) -> None:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    inter = np.empty(a.shape + (2,), dtype="<f8")
    inter[..., 0] = a.real
    inter[..., 1] = a.imag
    Path(path).write_bytes(_header(MAGIC_COMPLEX, a.shape) + inter.tobytes())


def read_complex(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    shape = _read_header(buf, MAGIC_COMPLEX)
    n = int(np.prod(shape))
    if len(buf) != 16 + 16 * n:
        raise ValueError("file size does not match header")
    vals = np.frombuffer(buf, dtype="<f8", offset=16).reshape(shape + (2,))
    return vals[..., 0] + 1j * vals[..., 1]


def write_real(path, a) -> None:
    a = np.ascontiguousarray(a, dtype="<f8")
    Path(path).write_bytes(_header(MAGIC_REAL, a.shape) + a.tobytes())


def read_real(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    shape = _read_header(buf, MAGIC_REAL)
    if len(buf) != 16 + 8 * int(np.prod(shape)):
        raise ValueError("file size does not match header")
    return np.frombuffer(buf, dtype="<f8", offset=16).reshape(shape).astype(float)


def write_pgm(path, img, bits: int = 8, vmin=None, vmax=None) -> tuple:
    """Write a linearly scaled 2-D array as binary PGM.

    Values map from ``[vmin, vmax]`` (default: data range) onto
    ``[0, 2**bits - 1]``.

    Returns
    -------
    (vmin, vmax) : the scale used, so that the image can be mapped back.
    """
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    vmin = float(img.min()) if vmin is None else float(vmin)
    vmax = float(img.max()) if vmax is None else float(vmax)
    top = 2**bits - 1
    span = vmax - vmin
    q = np.zeros(img.shape) if span <= 0 else (img - vmin) / span * top
    q = np.clip(np.rint(q), 0, top)
    data = q.astype(">u2" if bits == 16 else "u1").tobytes()
    head = f"P5\n{img.shape[1]} {img.shape[0]}\n{top}\n".encode("ascii")
    Path(path).write_bytes(head + data)
    return vmin, vmax


def _pgm_tokens(buf: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1


def read_pgm(path, vmin: float = 0.0, vmax=None) -> np.ndarray:
    """Read a binary PGM. Samples are mapped linearly onto ``[vmin, vmax]``
    (default ``vmax`` is the file's maxval, so raw integer values are returned)."""
    buf = Path(path).read_bytes()
    (magic, w, h, top), pos = _pgm_tokens(buf, 4)
    if magic != b"P5":
        raise ValueError("only binary PGM (P5) is supported")
    w, h, top = int(w), int(h), int(top)
    dtype = ">u2" if top > 255 else "u1"
    raw = np.frombuffer(buf, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(float)
    if vmax is None:
        return raw
    return vmin + raw / top * (float(vmax) - vmin)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
