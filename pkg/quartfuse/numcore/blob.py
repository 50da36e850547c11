"""
QTNS tensor blobs.

Layout: magic b"QTNS", format version (u32), dtype code (u8: 0 = f32, 1 = f64),
rank (u8), dims (u64 each), then the raw values. Everything little-endian.
"""
from typing import BinaryIO
import struct

import numpy as np

from ..misc.exceptions import FormatError, IntegrityError

MAGIC = b"QTNS"
FORMAT_VERSION = 1
DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

_HEADER = struct.Struct("<4sIBB")

def encode_array(array : np.ndarray) -> bytes:
    """Serialise a float32/float64 array as one QTNS blob."""
    array = np.asarray(array)
    if array.dtype not in DTYPE_CODES:
        raise FormatError(f"QTNS stores f32 or f64, not {array.dtype}")
    if array.ndim < 1 or array.ndim > 255:
        raise FormatError(f"QTNS rank must lie in [1, 255], got {array.ndim}")
    code = DTYPE_CODES[array.dtype]
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, code, array.ndim)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + dims + np.ascontiguousarray(array, dtype=CODE_DTYPES[code]).tobytes()

def decode_array(buffer : bytes, offset : int = 0) -> tuple[np.ndarray, int]:
    """Read one QTNS blob starting at offset; returns (array, offset just past the blob)."""
    end = offset + _HEADER.size
    if len(buffer) < end:
        raise IntegrityError(f"QTNS header truncated at offset {offset}")
    magic, version, code, rank = _HEADER.unpack_from(buffer, offset)
    if magic != MAGIC:
        raise FormatError(f"bad QTNS magic {magic!r} at offset {offset}")
    if version != FORMAT_VERSION:
        raise FormatError(f"QTNS format version {version} is not supported (expected {FORMAT_VERSION})")
    if code not in CODE_DTYPES:
        raise FormatError(f"unknown QTNS dtype code {code}")
    if rank < 1:
        raise FormatError("QTNS rank must be at least 1")

    dims_end = end + 8 * rank
    if len(buffer) < dims_end:
        raise IntegrityError(f"QTNS dims truncated at offset {offset}")
    shape = struct.unpack_from(f"<{rank}Q", buffer, end)
    dtype = CODE_DTYPES[code]
    data_end = dims_end + int(np.prod(shape)) * dtype.itemsize
    if len(buffer) < data_end:
        raise IntegrityError(f"QTNS data truncated at offset {offset}: need {data_end - dims_end} bytes")
    array = np.frombuffer(buffer, dtype=dtype, count=int(np.prod(shape)), offset=dims_end).reshape(shape)
    return array.astype(dtype.newbyteorder("="), copy=True), data_end

def write_array(stream : BinaryIO, array : np.ndarray) -> tuple[int, int]:
    """Append one blob to an open binary stream; returns (offset, length)."""
    blob = encode_array(array)
    offset = stream.tell()
    stream.write(blob)
    return offset, len(blob)

def read_array(buffer : bytes, offset : int, length : int) -> np.ndarray:
    """Read the blob recorded at (offset, length) and check it spans exactly that range."""
    array, end = decode_array(buffer, offset)
    if end != offset + length:
        raise IntegrityError(f"QTNS blob at {offset} spans {end - offset} bytes, index says {length}")
    return array
