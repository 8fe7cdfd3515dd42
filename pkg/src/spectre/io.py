"""Matrix and mask files.

``RMX1`` layout: the ASCII magic ``RMX1``, then ``n`` and ``d`` as unsigned
32-bit little-endian integers, then ``n * d`` little-endian binary64 values
in row-major order.  Nothing may follow the payload.  Mask files hold one
byte per row, each ``0`` or ``1``.
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"RMX1"
HEADER = struct.Struct("<4sII")
_DECIMAL = re.compile(rb"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


def encode_rmx(X) -> bytes:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("matrix contains non-finite values")
    n, d = X.shape
    if n > 0xFFFFFFFF or d > 0xFFFFFFFF:
        raise DataError("matrix dimensions do not fit in 32 bits")
    return HEADER.pack(MAGIC, n, d) + np.ascontiguousarray(X, dtype="<f8").tobytes()


def decode_rmx(buf: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(buf) < HEADER.size:
        raise DataError(f"{source}: truncated header, file ends at byte offset {len(buf)} (need {HEADER.size} bytes)")
    magic, n, d = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DataError(f"{source}: bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    if n == 0:
        raise DataError(f"{source}: row count is zero (byte offset 4)")
    if d == 0:
        raise DataError(f"{source}: column count is zero (byte offset 8)")
    expected = HEADER.size + 8 * n * d
    if len(buf) < expected:
        raise DataError(
            f"{source}: payload truncated at byte offset {len(buf)}; n={n}, d={d} needs {expected} bytes"
        )
    if len(buf) > expected:
        raise DataError(f"{source}: {len(buf) - expected} trailing bytes starting at byte offset {expected}")
    X = np.frombuffer(buf, dtype="<f8", count=n * d, offset=HEADER.size).reshape(n, d)
    bad = np.flatnonzero(~np.isfinite(X.ravel()))
    if bad.size:
        j = int(bad[0])
        raise DataError(
            f"{source}: non-finite value at byte offset {HEADER.size + 8 * j} (row {j // d}, column {j % d})"
        )
    return X.astype(np.float64)


def read_rmx(path) -> np.ndarray:
    path = Path(path)
    return decode_rmx(_read_bytes(path), str(path))


def write_rmx(path, X) -> None:
    _write_bytes(Path(path), encode_rmx(X))


def decode_csv(buf: bytes, source: str = "<bytes>") -> np.ndarray:
    """Header-free rows of comma-separated decimals; blank lines are skipped."""
    rows = []
    width = None
    pos = 0
    for line in buf.splitlines(keepends=True):
        start = pos
        pos += len(line)
        body = line.rstrip(b"\r\n")
        if not body.strip():
            continue
        values = []
        off = start
        for field in body.split(b","):
            lead = len(field) - len(field.lstrip())
            token = field.strip()
            if not _DECIMAL.fullmatch(token):
                raise DataError(f"{source}: cannot parse {token[:32]!r} as a decimal at byte offset {off + lead}")
            v = float(token)
            if not np.isfinite(v):
                raise DataError(f"{source}: value out of range at byte offset {off + lead}")
            values.append(v)
            off += len(field) + 1
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataError(
                f"{source}: row at byte offset {start} has {len(values)} fields, expected {width}"
            )
        rows.append(values)
    if not rows:
        raise DataError(f"{source}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def read_csv(path) -> np.ndarray:
    path = Path(path)
    return decode_csv(_read_bytes(path), str(path))


def read_matrix(path) -> np.ndarray:
    """Dispatch on the extension: ``.csv`` is text, anything else must be RMX1."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    return read_rmx(path)


def encode_mask(mask) -> bytes:
    return np.asarray(mask, dtype=bool).astype(np.uint8).tobytes()


def decode_mask(buf: bytes, n: int | None = None, source: str = "<bytes>") -> np.ndarray:
    raw = np.frombuffer(buf, dtype=np.uint8)
    if n is not None and raw.size != n:
        raise DataError(f"{source}: mask has {raw.size} bytes but the matrix has {n} rows (byte offset {min(raw.size, n)})")
    bad = np.flatnonzero(raw > 1)
    if bad.size:
        raise DataError(f"{source}: mask byte {int(raw[bad[0]])} at byte offset {int(bad[0])} is not 0 or 1")
    return raw.astype(bool)


def read_mask(path, n: int | None = None) -> np.ndarray:
    path = Path(path)
    return decode_mask(_read_bytes(path), n, str(path))


def write_mask(path, mask) -> None:
    _write_bytes(Path(path), encode_mask(mask))


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc


def _write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
