"""Writer/reader for the VTNS tensor container consumed by the analysis
toolkit.  The byte layout is the interface contract: magic `VTNS`,
version u8=1, dtype u8=0 (f32), ndim u8, ndim x u32 little-endian dims,
then the f32 little-endian row-major payload."""

from __future__ import annotations

import math
import struct

import numpy as np

MAGIC = b"VTNS"


def write_vtns(path, array: np.ndarray) -> None:
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim == 0 or any(d <= 0 for d in arr.shape):
        raise ValueError(f"tensor must have positive dims, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("refusing to export non-finite values")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<BBB", 1, 0, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_vtns(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad magic in {path!s}")
    version, dtype, ndim = struct.unpack_from("<BBB", blob, 4)
    if (version, dtype) != (1, 0):
        raise ValueError(f"unsupported VTNS version/dtype {version}/{dtype}")
    dims = struct.unpack_from(f"<{ndim}I", blob, 7)
    payload = blob[7 + 4 * ndim :]
    if len(payload) != 4 * math.prod(dims):
        raise ValueError("payload length does not match dims")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
