"""Quantized elementwise arithmetic plus concatenation and slicing.

Because every multiplier is a power of two, two operands are brought to a
common exponent with at most one left shift each; the wide intermediate is
then requantized with a rounding right shift and saturated to the
activation bit width.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from ..quantize import clip, rshift_round
from ..tensor import FTensor, QTensor


def _requant(arr: np.ndarray, exp: int, out_exp: int | None, act_bits: int) -> tuple[np.ndarray, int]:
    if out_exp is None:
        out_exp = exp
    r = exp - out_exp
    if r < 0:
        raise ConfigError(
            f"result exponent {exp} below requested output exponent {out_exp}"
        )
    return clip(rshift_round(arr, r), act_bits), out_exp


def eltwise(
    kind: str,
    a: QTensor,
    b: QTensor,
    pre_shift: tuple[int, int] | None = None,
    *,
    out_exp: int | None = None,
    act_bits: int = 16,
) -> QTensor:
    """Elementwise add/mul of two quantized tensors.

    ``pre_shift`` gives the left shift applied to each operand before the
    operation; for ``add`` the shifted operands must land on one common
    exponent.  When omitted, the alignment is derived from the operand
    exponents.  The result is requantized to ``out_exp`` (default: the
    natural exponent of the intermediate) and clipped to ``act_bits``.
    """
    if kind not in ("add", "mul"):
        raise ConfigError(f"unknown eltwise kind {kind!r}")
    if a.shape != b.shape:
        raise ShapeError(f"operand shapes differ: {a.shape} vs {b.shape}")
    if pre_shift is None:
        if kind == "add":
            common = max(a.exp, b.exp)
            pre_shift = (common - a.exp, common - b.exp)
        else:
            pre_shift = (0, 0)
    la, lb = pre_shift
    if la < 0 or lb < 0:
        raise ConfigError("pre-shifts must be left shifts (non-negative)")
    av = a.array.astype(np.int64) << la
    bv = b.array.astype(np.int64) << lb
    if kind == "add":
        if a.exp + la != b.exp + lb:
            raise ConfigError(
                f"exponents cannot be aligned: {a.exp}+{la} != {b.exp}+{lb}"
            )
        res = av + bv
        exp = a.exp + la
    else:
        res = av * bv
        exp = (a.exp + la) + (b.exp + lb)
    out, exp = _requant(res, exp, out_exp, act_bits)
    return QTensor(a.shape, out, bits=act_bits, exp=exp)


def concat(tensors, axis: int = 0, *, out_exp: int | None = None, act_bits: int = 16):
    """Concatenate along an axis.

    FTensor inputs concatenate directly.  QTensor inputs are first aligned
    to a common exponent with one left shift each, then requantized to
    ``out_exp`` and clipped to ``act_bits``.
    """
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    first = tensors[0]
    for t in tensors[1:]:
        if type(t) is not type(first):
            raise ShapeError("cannot concatenate mixed tensor kinds")
        for ax, (da, db) in enumerate(zip(first.shape, t.shape)):
            if ax != axis and da != db:
                raise ShapeError(
                    f"non-axis extent mismatch at dim {ax}: {first.shape} vs {t.shape}"
                )
    if isinstance(first, FTensor):
        out = np.concatenate([t.array for t in tensors], axis=axis)
        return FTensor(out.shape, out)
    common = max(t.exp for t in tensors)
    parts = [t.array.astype(np.int64) << (common - t.exp) for t in tensors]
    arr = np.concatenate(parts, axis=axis)
    out, exp = _requant(arr, common, out_exp, act_bits)
    return QTensor(out.shape, out, bits=act_bits, exp=exp)


def slice_axis(x, axis: int, start: int, stop: int):
    """Standard slicing along one axis; complementary slices of a concat
    recover the original parts."""
    if axis < 0 or axis >= len(x.shape):
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    if not (0 <= start < stop <= x.shape[axis]):
        raise ShapeError(f"slice [{start}:{stop}] invalid for extent {x.shape[axis]}")
    idx = tuple(slice(None) if ax != axis else slice(start, stop)
                for ax in range(len(x.shape)))
    sub = x.array[idx]
    if isinstance(x, QTensor):
        return QTensor(sub.shape, sub, bits=x.bits, exp=x.exp)
    return FTensor(sub.shape, sub)
