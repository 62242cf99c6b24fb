"""Reader/writer for the VTNS binary tensor container.

Layout (little-endian throughout):

    offset  size        field
    0       4           magic bytes b"VTNS"
    4       1           format version, currently 1
    5       1           dtype code, 0 = float32
    6       1           ndim
    7       4 * ndim    dims, u32 each
    ...     4 * prod    payload, float32 row-major (last dim fastest)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import TensorFormatError

MAGIC = b"VTNS"
VERSION = 1
DTYPE_F32 = 0


@dataclass(frozen=True)
class TensorFile:
    """An n-dimensional float32 tensor with explicit dims."""

    dims: tuple[int, ...]
    data: np.ndarray  # 1-D float32, length = prod(dims)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "TensorFile":
        arr = np.asarray(array, dtype=np.float32)
        return cls(dims=tuple(int(d) for d in arr.shape), data=arr.reshape(-1))

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def validate(self) -> None:
        if len(self.dims) == 0:
            raise TensorFormatError("tensor must have at least one dim")
        if any(d <= 0 for d in self.dims):
            raise TensorFormatError(f"dims must be positive, got {self.dims}")
        expected = math.prod(self.dims)
        if self.data.size != expected:
            raise TensorFormatError(
                f"data length {self.data.size} does not match dims product {expected}"
            )
        if not np.isfinite(self.data).all():
            raise TensorFormatError("tensor contains non-finite values")


def write_tensor(path, tensor: TensorFile) -> None:
    tensor.validate()
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_F32, len(tensor.dims))
    header += struct.pack(f"<{len(tensor.dims)}I", *tensor.dims)
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> TensorFile:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 7 or blob[:4] != MAGIC:
        raise TensorFormatError(f"bad magic in {path!s}")
    version, dtype, ndim = struct.unpack_from("<BBB", blob, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    if ndim == 0:
        raise TensorFormatError("tensor must have at least one dim")
    header_end = 7 + 4 * ndim
    if len(blob) < header_end:
        raise TensorFormatError("truncated header")
    dims = struct.unpack_from(f"<{ndim}I", blob, 7)
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"dims must be positive, got {dims}")
    count = math.prod(dims)
    payload = blob[header_end:]
    if len(payload) != 4 * count:
        raise TensorFormatError(
            f"payload is {len(payload)} bytes, expected {4 * count} for dims {dims}"
        )
    data = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return TensorFile(dims=tuple(int(d) for d in dims), data=data)


def write_array(path, array: np.ndarray) -> None:
    write_tensor(path, TensorFile.from_array(array))


def read_array(path) -> np.ndarray:
    return read_tensor(path).to_array()
