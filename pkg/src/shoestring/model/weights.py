"""Binary weight container.

Layout (little-endian)::

    "LPCW" | u32 version | u32 tensor count
    per tensor:
        u16 name length | name (utf-8) | u8 dtype tag | u32 rows | u32 cols | f32 density
        payload:
            f32 tag:  rows * cols f32, row-major
            q8 tag:   u32 block count | block count * (u16 block_row, u16 block_col)
                      | block count * 32 int8 (each 8x4 block row-major)
    u32 CRC32 over the concatenated payloads
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..kernels import BLOCK_SIZE, BlockSparseMatrix

MAGIC = b"LPCW"
VERSION = 1
DTYPE_F32 = 0
DTYPE_Q8 = 1


class WeightFileError(ValueError):
    pass


class BadMagicError(WeightFileError):
    pass


class UnsupportedVersionError(WeightFileError):
    pass


class ChecksumError(WeightFileError):
    pass


class TruncatedFileError(WeightFileError):
    pass


class TensorShapeError(WeightFileError):
    def __init__(self, name, message):
        super().__init__(f"tensor {name!r}: {message}")
        self.name = name


class MissingTensorError(TensorShapeError):
    pass


class DTypeMismatchError(TensorShapeError):
    pass


@dataclass(frozen=True, eq=False)
class TensorRecord:
    value: object  # float32 ndarray or BlockSparseMatrix
    density: float = 1.0

    @property
    def is_quantized(self):
        return isinstance(self.value, BlockSparseMatrix)

    @property
    def shape(self):
        return self.value.shape


def encode_weights(records):
    """Serialize an ordered ``name -> TensorRecord`` mapping."""
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(records))
    crc = 0
    for name, rec in records.items():
        raw = name.encode("utf-8")
        value = rec.value
        if isinstance(value, BlockSparseMatrix):
            tag, (rows, cols) = DTYPE_Q8, value.shape
            payload = (
                struct.pack("<I", value.n_blocks)
                + value.coords.astype("<u2").tobytes()
                + value.data.astype(np.int8).tobytes()
            )
        else:
            arr = np.asarray(value)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            tag, (rows, cols) = DTYPE_F32, arr.shape
            payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BIIf", tag, rows, cols, rec.density)
        out += payload
        crc = zlib.crc32(payload, crc)
    out += struct.pack("<I", crc)
    return bytes(out)


def save_weights(path, records):
    Path(path).write_bytes(encode_weights(records))


class _Reader:
    def __init__(self, buf):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"file truncated at byte {self.pos} (needed {n} more bytes)")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_weights(buf):
    r = _Reader(buf)
    if len(buf) < 4 or bytes(r.take(4)) != MAGIC:
        raise BadMagicError("not a weight file (bad magic)")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported weight file version {version}")
    records = {}
    crc = 0
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = bytes(r.take(name_len)).decode("utf-8")
        tag, rows, cols, density = r.unpack("<BIIf")
        start = r.pos
        if tag == DTYPE_F32:
            data = np.frombuffer(r.take(4 * rows * cols), dtype="<f4").reshape(rows, cols)
            value = data.astype(np.float32)
            value.flags.writeable = False
        elif tag == DTYPE_Q8:
            (n_blocks,) = r.unpack("<I")
            coords = np.frombuffer(r.take(4 * n_blocks), dtype="<u2").reshape(n_blocks, 2)
            data = np.frombuffer(r.take(BLOCK_SIZE * n_blocks), dtype=np.int8)
            try:
                value = BlockSparseMatrix(rows, cols, coords.astype(np.int64), data.copy())
            except ValueError as exc:
                raise TensorShapeError(name, str(exc)) from None
        else:
            raise WeightFileError(f"tensor {name!r}: unknown dtype tag {tag}")
        crc = zlib.crc32(r.buf[start : r.pos], crc)
        if name in records:
            raise WeightFileError(f"duplicate tensor {name!r}")
        records[name] = TensorRecord(value, float(density))
    (stored,) = r.unpack("<I")
    if stored != crc:
        raise ChecksumError(f"payload checksum mismatch (stored {stored:#010x}, computed {crc:#010x})")
    if r.pos != len(r.buf):
        raise WeightFileError(f"{len(r.buf) - r.pos} trailing bytes after checksum")
    return records


def load_weights(path):
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise WeightFileError(f"cannot read weight file {path}: {exc.strerror}") from None
    return decode_weights(buf)
