"""2-D convolution in float-reference and quantized-integer form.

Both forms compute y = (sum_{s,t} W * x + b) * scale; the quantized form
accumulates in wide integers and requantizes the scaled accumulator with a
rounding right shift followed by saturation to the activation bit width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from ..quantize import clip, rshift_round
from ..tensor import FTensor, QTensor, bit_range

# (kernel, stride) pairs the operator set supports.
LEGAL_CONV_SHAPES = frozenset({(1, 1), (3, 1), (3, 2), (5, 1), (5, 2)})


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    stride: int
    in_ch: int
    out_ch: int
    padding: int = -1  # -1: same-style default (kernel - 1) // 2 per side

    def __post_init__(self):
        if (self.kernel, self.stride) not in LEGAL_CONV_SHAPES:
            raise ConfigError(
                f"unsupported (kernel, stride) = ({self.kernel}, {self.stride})"
            )
        if self.in_ch <= 0 or self.out_ch <= 0:
            raise ConfigError("channel counts must be positive")
        if self.padding == -1:
            object.__setattr__(self, "padding", (self.kernel - 1) // 2)
        if self.padding < 0:
            raise ConfigError("padding must be non-negative")

    def label(self) -> str:
        return f"conv({self.kernel},{self.stride})"


def conv_output_hw(spec: ConvSpec, h: int, w: int) -> tuple[int, int]:
    """Spatial extents: floor((in + 2*pad - kernel) / stride) + 1."""
    oh = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
    ow = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"conv collapses {h}x{w} to {oh}x{ow}")
    return oh, ow


def _im2col(x: np.ndarray, spec: ConvSpec) -> tuple[np.ndarray, int, int]:
    """Lower (C, H, W) to a (OH*OW, C*k*k) patch matrix with zero padding."""
    c, h, w = x.shape
    p, k, s = spec.padding, spec.kernel, spec.stride
    oh, ow = conv_output_hw(spec, h, w)
    xp = np.zeros((c, h + 2 * p, w + 2 * p), dtype=x.dtype)
    xp[:, p : p + h, p : p + w] = x
    cols = np.empty((oh * ow, c * k * k), dtype=x.dtype)
    idx = 0
    for di in range(k):
        for dj in range(k):
            patch = xp[:, di : di + s * oh : s, dj : dj + s * ow : s]
            cols[:, idx::k * k] = patch.reshape(c, -1).T
            idx += 1
    # column order fixed as (channel-major, then kernel offset)
    return cols, oh, ow


def _check_conv_args(x_shape, spec: ConvSpec, w_shape):
    if len(x_shape) != 3 or x_shape[0] != spec.in_ch:
        raise ShapeError(f"input shape {x_shape} does not match in_ch={spec.in_ch}")
    want = (spec.out_ch, spec.in_ch, spec.kernel, spec.kernel)
    if tuple(w_shape) != want:
        raise ShapeError(f"weight shape {tuple(w_shape)} != {want}")


def _per_channel(v: np.ndarray, out_ch: int, name: str) -> np.ndarray:
    v = v.ravel()
    if v.size == 1:
        return np.broadcast_to(v, (out_ch,))
    if v.size != out_ch:
        raise ShapeError(f"{name} must be scalar or per-output-channel")
    return v


def conv2d_float(x: FTensor, spec: ConvSpec, w: FTensor, b: FTensor, s: FTensor) -> FTensor:
    """Float reference convolution with bias and output scale."""
    _check_conv_args(x.shape, spec, w.shape)
    cols, oh, ow = _im2col(x.array, spec)
    wmat = w.array.reshape(spec.out_ch, -1)
    acc = cols @ wmat.T  # (OH*OW, out_ch)
    acc += _per_channel(b.array, spec.out_ch, "bias")
    acc *= _per_channel(s.array, spec.out_ch, "scale")
    return FTensor((spec.out_ch, oh, ow), acc.T.reshape(spec.out_ch, oh, ow))


def accumulator_bound(spec: ConvSpec, weight_bits: int, act_bits: int,
                      bias_bits: int, scale_bits: int) -> int:
    """Worst-case |m2| for the configured bit plan (exact integer)."""
    _, wmax = bit_range(weight_bits)
    _, xmax = bit_range(act_bits)
    taps = spec.in_ch * spec.kernel * spec.kernel
    m1 = abs(wmax) * abs(xmax) * taps + (1 << (bias_bits - 1))
    return m1 * (1 << (scale_bits - 1))


def check_accumulator_width(spec: ConvSpec, weight_bits: int, act_bits: int,
                            bias_bits: int, scale_bits: int) -> None:
    """Reject bit plans whose worst case would overflow the 64-bit accumulator."""
    if accumulator_bound(spec, weight_bits, act_bits, bias_bits, scale_bits) >= 1 << 62:
        raise ConfigError(
            f"{spec.label()} with {spec.in_ch} input channels can overflow the "
            "wide accumulator for this bit plan"
        )


def conv2d_quant(
    x: QTensor,
    spec: ConvSpec,
    w: QTensor,
    b: QTensor,
    s: QTensor,
    r: int,
    *,
    act_bits: int = 16,
    relu: bool = False,
) -> QTensor:
    """Integer convolution: m1 = sum(W*x) + b, m2 = m1 * s,
    y = clip(rshift_round(m2, r)).

    The bias must already be aligned to exponent exp(w) + exp(x); the
    output exponent is exp(w) + exp(x) + exp(s) - r.
    """
    if r < 0:
        raise ConfigError(f"required right shift is negative ({r}); exponent plan invalid")
    _check_conv_args(x.shape, spec, w.shape)
    if b.exp != w.exp + x.exp:
        raise ConfigError(
            f"bias exponent {b.exp} is not aligned to weight+input exponent {w.exp + x.exp}"
        )
    check_accumulator_width(spec, w.bits, x.bits, b.bits, s.bits)
    cols, oh, ow = _im2col(x.array, spec)
    wmat = w.array.reshape(spec.out_ch, -1)
    m1 = cols @ wmat.T
    m1 += _per_channel(b.array, spec.out_ch, "bias")
    m2 = m1 * _per_channel(s.array, spec.out_ch, "scale")
    y = clip(rshift_round(m2, r), act_bits)
    if relu:
        y = np.maximum(y, 0)
    out_exp = w.exp + x.exp + s.exp - r
    return QTensor((spec.out_ch, oh, ow), y.T.reshape(spec.out_ch, oh, ow),
                   bits=act_bits, exp=out_exp)
