"""Binary record formats shared by embedding files and checkpoints.

Both formats are little-endian throughout.  Strings are UTF-8 with a u16
byte-length prefix.

Named-array archive (checkpoint parameter blobs):
    magic b"PGAR" | u16 version | u32 count
    per record: name | u8 dtype code | u8 ndim | u32 dims... | raw data

Embedding file:
    magic b"PGEM" | u16 version | u32 dim | u32 pair count
    per record: type name | value name | dim little-endian float32
"""

from __future__ import annotations

import struct
from typing import IO, BinaryIO

import numpy as np

ARRAY_MAGIC = b"PGAR"
EMBED_MAGIC = b"PGEM"
FORMAT_VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("<f8"): 1,
    np.dtype("<i8"): 2,
    np.dtype("u1"): 3,
}
_CODE_DTYPES = {code: dt for dt, code in _DTYPE_CODES.items()}


class ArchiveError(ValueError):
    """Corrupt archive, bad magic, or unsupported version."""


def _write_string(fh: BinaryIO, text: str) -> None:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ArchiveError(f"string too long for record: {len(raw)} bytes")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_string(fh: BinaryIO) -> str:
    (length,) = struct.unpack("<H", _read_exact(fh, 2))
    return _read_exact(fh, length).decode("utf-8")


def _read_exact(fh: IO[bytes], n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ArchiveError("truncated archive")
    return data


def write_arrays(path: str, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays; order preserved, values bitwise exact."""
    with open(path, "wb") as fh:
        fh.write(ARRAY_MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(arrays)))
        for name, array in arrays.items():
            arr = np.ascontiguousarray(array)
            dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
            arr = arr.astype(dtype, copy=False)
            if arr.dtype not in _DTYPE_CODES:
                raise ArchiveError(f"unsupported dtype {arr.dtype} for {name!r}")
            _write_string(fh, name)
            fh.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_arrays(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != ARRAY_MAGIC:
            raise ArchiveError(f"{path}: not a named-array archive")
        version, count = struct.unpack("<HI", _read_exact(fh, 6))
        if version != FORMAT_VERSION:
            raise ArchiveError(f"{path}: unsupported archive version {version}")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_string(fh)
            code, ndim = struct.unpack("<BB", _read_exact(fh, 2))
            if code not in _CODE_DTYPES:
                raise ArchiveError(f"{path}: unknown dtype code {code}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            dtype = _CODE_DTYPES[code]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            arrays[name] = np.frombuffer(_read_exact(fh, nbytes), dtype=dtype).reshape(shape).copy()
        return arrays


def write_embedding_records(
    path: str, dim: int, records: list[tuple[str, str, np.ndarray]]
) -> None:
    """Write (type, value, vector) records plus a human-readable sidecar."""
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<HII", FORMAT_VERSION, dim, len(records)))
        for type_name, value, vector in records:
            vec = np.asarray(vector, dtype="<f4")
            if vec.shape != (dim,):
                raise ArchiveError(
                    f"vector for ({type_name!r}, {value!r}) has shape {vec.shape}, "
                    f"expected ({dim},)"
                )
            _write_string(fh, type_name)
            _write_string(fh, value)
            fh.write(vec.tobytes())
    with open(path + ".manifest.txt", "w", encoding="utf-8") as sidecar:
        sidecar.write(f"embedding file: {path}\n")
        sidecar.write(f"format version: {FORMAT_VERSION}\n")
        sidecar.write(f"dimension: {dim}\n")
        sidecar.write(f"pairs: {len(records)}\n")
        for type_name, value, vector in records:
            norm = float(np.linalg.norm(np.asarray(vector, dtype=np.float64)))
            sidecar.write(f"  {type_name} = {value}  |v| = {norm:.6f}\n")


def read_embedding_records(path: str) -> tuple[int, list[tuple[str, str, np.ndarray]]]:
    with open(path, "rb") as fh:
        if fh.read(4) != EMBED_MAGIC:
            raise ArchiveError(f"{path}: not an embedding file")
        version, dim, count = struct.unpack("<HII", _read_exact(fh, 10))
        if version != FORMAT_VERSION:
            raise ArchiveError(f"{path}: unsupported embedding file version {version}")
        records = []
        for _ in range(count):
            type_name = _read_string(fh)
            value = _read_string(fh)
            vec = np.frombuffer(_read_exact(fh, 4 * dim), dtype="<f4").copy()
            records.append((type_name, value, vec))
        return dim, records
