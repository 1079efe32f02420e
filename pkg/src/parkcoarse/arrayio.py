"""Deterministic binary container for named float64 arrays.

Checkpoints (codec weights, predictor weights, stage artifacts) all use
one file layout so that byte-identical reruns are easy to verify:

    magic   b"PKCA1\\n"
    count   uint32 little-endian, number of arrays
    entry*  name_len uint16 LE | name utf-8 | ndim uint16 LE
            | dims int64 LE * ndim | data float64 LE row-major

Entries are written in sorted name order; the format has no timestamps
or padding so identical inputs produce identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataValidationError

MAGIC = b"PKCA1\n"


def write_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<H", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}q", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def read_arrays(path) -> dict[str, np.ndarray]:
    path = Path(path)
    blob = path.read_bytes()
    if not blob.startswith(MAGIC):
        raise DataValidationError(f"{path}: not a PKCA1 array file")
    offset = len(MAGIC)
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        dims = struct.unpack_from(f"<{ndim}q", blob, offset)
        offset += 8 * ndim
        n = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(dims)
        offset += 8 * n
        arrays[name] = arr.astype(np.float64)
    return arrays


def format_float(x: float) -> str:
    """Shortest round-trip decimal text for a float (repr semantics)."""
    return repr(float(x))
