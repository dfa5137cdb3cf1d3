"""
Binary tensor files: 4 magic bytes, u32 rank, rank x u32 extents, then the
row-major payload, all little-endian. "MDT1" carries a float32 payload;
"MDT8" is the same layout with float64, used for checkpoints of 64-bit models.
"""

import os
import struct

import numpy as np

from mdhr_lib.helpers.errors import FormatError, UsageError
from mdhr_lib.libs.tensor.tensor import Tensor

MAGIC_F32 = b"MDT1"
MAGIC_F64 = b"MDT8"

payload_dtypes = {MAGIC_F32: np.dtype("<f4"), MAGIC_F64: np.dtype("<f8")}


def encode_header(shape, magic=MAGIC_F32):
    return magic + struct.pack("<I", len(shape)) + struct.pack("<{}I".format(len(shape)), *shape)

def write_tensor(path, value, magic=MAGIC_F32):
    """
    Writes a ``Tensor`` or ndarray to ``path``. Pass ``magic=MAGIC_F64`` to
    keep 64-bit values exact.
    """
    if magic not in payload_dtypes:
        raise UsageError("unknown tensor magic {!r}".format(magic))
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    payload = np.ascontiguousarray(array, dtype=payload_dtypes[magic])
    with open(path, "wb") as f:
        f.write(encode_header(array.shape, magic))
        f.write(payload.tobytes())

def _read_exact(f, path, count, what):
    offset = f.tell()
    data = f.read(count)
    if len(data) != count:
        raise FormatError(path, offset + len(data), "truncated {} (wanted {} bytes, got {})".format(what, count, len(data)))
    return data

def read_header(f, path):
    magic = f.read(4)
    if magic not in payload_dtypes:
        raise FormatError(path, 0, "bad magic bytes {!r}".format(magic))
    rank, = struct.unpack("<I", _read_exact(f, path, 4, "rank"))
    extents = struct.unpack("<{}I".format(rank), _read_exact(f, path, 4 * rank, "extents"))
    return magic, tuple(extents)

def read_tensor(path, mmap=False):
    """
    Reads a tensor file back into an ndarray (float32 for "MDT1", float64 for
    "MDT8"). With ``mmap=True`` the payload is memory-mapped read-only
    instead of loaded.
    """
    with open(path, "rb") as f:
        magic, shape = read_header(f, path)
        header_size = f.tell()
        dtype = payload_dtypes[magic]
        count = int(np.prod(shape, dtype=np.int64))
        expected = count * dtype.itemsize
        available = os.fstat(f.fileno()).st_size - header_size
        if available < expected:
            raise FormatError(path, header_size + available, "truncated payload (wanted {} bytes, got {})".format(expected, available))
        if available > expected:
            raise FormatError(path, header_size + expected, "{} trailing bytes after payload".format(available - expected))
        if mmap:
            return np.memmap(path, dtype=dtype, mode="r", offset=header_size, shape=shape)
        data = np.frombuffer(f.read(expected), dtype=dtype, count=count)
    return data.reshape(shape).astype(dtype.newbyteorder("="))
