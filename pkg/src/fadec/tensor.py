"""Dense tensor containers and the FTZ/QTZ file format.

FTensor holds real values (float64 in memory), QTensor holds signed
integers together with the fixed-point metadata (bit width, power-of-two
exponent): the represented value of an element q is q / 2**exp.

File format
-----------
``FTZ1``/``QTZ1`` magic (4 bytes), little-endian u32 rank, u32 extents,
then for QTZ an i8 bits field and i16 exp field, then the payload as
little-endian f32 (FTZ) or i32 (QTZ).  Round-trips are bit-exact.
"""

from __future__ import annotations

import base64
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ShapeError

FTZ_MAGIC = b"FTZ1"
QTZ_MAGIC = b"QTZ1"


def _as_shape(shape) -> tuple[int, ...]:
    out = tuple(int(s) for s in shape)
    if any(s <= 0 for s in out):
        raise ShapeError(f"extents must be positive, got {out}")
    return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FTensor:
    """N-D array of finite real values, immutable after construction."""

    shape: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = _as_shape(self.shape)
        arr = np.ascontiguousarray(self.data, dtype=np.float64).reshape(shape)
        if arr.size != int(np.prod(shape)):
            raise ShapeError("data length does not match extents")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("FTensor values must be finite")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def from_array(cls, arr) -> "FTensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr)

    @property
    def array(self) -> np.ndarray:
        return self.data

    def size(self) -> int:
        return int(self.data.size)


def bit_range(bits: int) -> tuple[int, int]:
    """Inclusive signed range [-2**(bits-1), 2**(bits-1)-1]."""
    if bits < 2:
        raise ShapeError(f"bit width must be >= 2, got {bits}")
    half = 1 << (bits - 1)
    return -half, half - 1


@dataclass(frozen=True)
class QTensor:
    """N-D array of signed integers with fixed-point metadata.

    Every element must lie within the signed range of ``bits``; the value
    represented by an element q is q / 2**exp.
    """

    shape: tuple[int, ...]
    data: np.ndarray = field(repr=False)
    bits: int = 16
    exp: int = 0

    def __post_init__(self):
        shape = _as_shape(self.shape)
        arr = np.ascontiguousarray(self.data, dtype=np.int64).reshape(shape)
        lo, hi = bit_range(self.bits)
        if arr.size and (arr.min() < lo or arr.max() > hi):
            raise ShapeError(
                f"value out of range for {self.bits}-bit tensor: "
                f"[{arr.min()}, {arr.max()}] vs [{lo}, {hi}]"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "exp", int(self.exp))

    @classmethod
    def from_array(cls, arr, bits: int, exp: int) -> "QTensor":
        arr = np.asarray(arr, dtype=np.int64)
        return cls(arr.shape, arr, bits=bits, exp=exp)

    @property
    def array(self) -> np.ndarray:
        return self.data

    def size(self) -> int:
        return int(self.data.size)


# ---------------------------------------------------------------------------
# FTZ / QTZ serialization


def ftensor_to_bytes(t: FTensor) -> bytes:
    head = FTZ_MAGIC + struct.pack("<I", len(t.shape))
    head += struct.pack(f"<{len(t.shape)}I", *t.shape)
    return head + t.data.astype("<f4").tobytes(order="C")


def qtensor_to_bytes(t: QTensor) -> bytes:
    if t.bits > 32:
        raise ShapeError("QTZ payload is i32; bits must be <= 32")
    head = QTZ_MAGIC + struct.pack("<I", len(t.shape))
    head += struct.pack(f"<{len(t.shape)}I", *t.shape)
    head += struct.pack("<bh", t.bits, t.exp)
    return head + t.data.astype("<i4").tobytes(order="C")


def _read_shape(buf: bytes, off: int) -> tuple[tuple[int, ...], int]:
    (rank,) = struct.unpack_from("<I", buf, off)
    off += 4
    shape = struct.unpack_from(f"<{rank}I", buf, off)
    off += 4 * rank
    return tuple(shape), off


def ftensor_from_bytes(buf: bytes) -> FTensor:
    if buf[:4] != FTZ_MAGIC:
        raise ParseError("not an FTZ payload (bad magic)")
    shape, off = _read_shape(buf, 4)
    n = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(buf, dtype="<f4", count=n, offset=off)
    return FTensor(shape, arr.astype(np.float64))


def qtensor_from_bytes(buf: bytes) -> QTensor:
    if buf[:4] != QTZ_MAGIC:
        raise ParseError("not a QTZ payload (bad magic)")
    shape, off = _read_shape(buf, 4)
    bits, exp = struct.unpack_from("<bh", buf, off)
    off += 3
    n = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(buf, dtype="<i4", count=n, offset=off)
    return QTensor(shape, arr.astype(np.int64), bits=bits, exp=exp)


def save_tensor(path, t) -> None:
    data = ftensor_to_bytes(t) if isinstance(t, FTensor) else qtensor_to_bytes(t)
    with open(path, "wb") as f:
        f.write(data)


def load_tensor(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] == FTZ_MAGIC:
        return ftensor_from_bytes(buf)
    if buf[:4] == QTZ_MAGIC:
        return qtensor_from_bytes(buf)
    raise ParseError(f"{path}: unknown tensor file magic {buf[:4]!r}")


def tensor_to_b64(t) -> str:
    data = ftensor_to_bytes(t) if isinstance(t, FTensor) else qtensor_to_bytes(t)
    return base64.b64encode(data).decode("ascii")


def tensor_from_b64(text: str):
    buf = base64.b64decode(text.encode("ascii"))
    if buf[:4] == FTZ_MAGIC:
        return ftensor_from_bytes(buf)
    if buf[:4] == QTZ_MAGIC:
        return qtensor_from_bytes(buf)
    raise ParseError("unknown tensor payload magic")
