"""Power-of-two post-training quantization primitives.

All multipliers are powers of two: a tensor is quantized by rounding
value * 2**exp into a signed integer range, and rescaling between ranges
is a shift.  Rounding is always half-away-from-zero so that results are
reproducible bit-for-bit across implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import FTensor, QTensor, bit_range

DEFAULT_WEIGHT_BITS = 8
DEFAULT_BIAS_BITS = 32
DEFAULT_SCALE_BITS = 8
DEFAULT_ACT_BITS = 16
DEFAULT_CLIP_RATE = 0.95

# Exponent search window for calibration; wide enough for any sane model.
_EXP_LO = -64
_EXP_HI = 64


@dataclass
class QuantParams:
    """Bit plan plus the per-tensor power-of-two exponents of a model."""

    weight_bits: int = DEFAULT_WEIGHT_BITS
    bias_bits: int = DEFAULT_BIAS_BITS
    scale_bits: int = DEFAULT_SCALE_BITS
    act_bits: int = DEFAULT_ACT_BITS
    clip_rate: float = DEFAULT_CLIP_RATE
    exponents: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for b in (self.weight_bits, self.bias_bits, self.scale_bits, self.act_bits):
            if b < 2:
                raise ConfigError(f"bit width must be >= 2, got {b}")
        if not (0.0 < self.clip_rate <= 1.0):
            raise ConfigError(f"clip_rate must be in (0, 1], got {self.clip_rate}")
        self.exponents = {k: int(v) for k, v in self.exponents.items()}


def rshift_round(v, r: int):
    """Shift right by r bits and round half away from zero.

    Accepts a python int or an int64 array; r == 0 returns the input
    unchanged.
    """
    if r < 0:
        raise ConfigError(f"shift amount must be non-negative, got {r}")
    if r == 0:
        return v
    half = 1 << (r - 1)
    if isinstance(v, (int, np.integer)):
        a = (abs(int(v)) + half) >> r
        return -a if v < 0 else a
    v = np.asarray(v, dtype=np.int64)
    mag = (np.abs(v) + half) >> r
    return np.where(v < 0, -mag, mag)


def clip(v, bits: int):
    """Saturate to the signed range of the given bit width."""
    lo, hi = bit_range(bits)
    if isinstance(v, (int, np.integer)):
        return min(max(int(v), lo), hi)
    return np.clip(np.asarray(v, dtype=np.int64), lo, hi)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest with ties away from zero (elementwise, float in)."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def quantize_tensor(t: FTensor, exp: int, bits: int) -> QTensor:
    """Round value * 2**exp into a signed integer tensor, saturating."""
    arr = t.array
    if not np.all(np.isfinite(arr)):
        raise ShapeError("cannot quantize non-finite model data")
    scaled = np.ldexp(arr, exp)
    q = clip(round_half_away(scaled).astype(np.int64), bits)
    return QTensor(t.shape, q, bits=bits, exp=exp)


def dequantize_tensor(t: QTensor) -> FTensor:
    return FTensor(t.shape, np.ldexp(t.array.astype(np.float64), -t.exp))


# ---------------------------------------------------------------------------
# Activation-range calibration
#
# For each sampled element we record the largest exponent at which it still
# rounds into the target range; pooling those per-element maxima into a
# histogram lets a site accumulate samples image by image without keeping
# raw values around.


def max_fitting_exponents(values: np.ndarray, bits: int) -> np.ndarray:
    """Per-element largest e such that |round(v * 2**e)| fits in bits.

    Zero elements fit any exponent and are reported as _EXP_HI.
    """
    _, hi = bit_range(bits)
    limit = hi + 0.5  # |v| * 2**e < limit <=> rounded magnitude <= hi
    a = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    e = np.full(a.shape, _EXP_HI, dtype=np.int64)
    nz = a > 0.0
    if np.any(nz):
        guess = np.floor(np.log2(limit / a[nz])).astype(np.int64)
        # log2 can be off by one ulp at bucket edges; fix up exactly.
        for _ in range(2):
            guess = np.where(np.ldexp(a[nz], guess + 1) < limit, guess + 1, guess)
            guess = np.where(np.ldexp(a[nz], guess) >= limit, guess - 1, guess)
        e[nz] = np.clip(guess, _EXP_LO, _EXP_HI)
    return e


def exponent_histogram(values: np.ndarray, bits: int) -> np.ndarray:
    """Histogram of max_fitting_exponents over the window [_EXP_LO, _EXP_HI]."""
    e = max_fitting_exponents(values, bits)
    return np.bincount(e - _EXP_LO, minlength=_EXP_HI - _EXP_LO + 1).astype(np.int64)


def exponent_from_histogram(hist: np.ndarray, clip_rate: float, default: int = 0) -> int:
    """Largest e with at least clip_rate of the counted elements fitting.

    Elements binned at _EXP_HI (zeros) fit every exponent; if they alone
    satisfy the rate, the result is bounded by the largest exponent at
    which some nonzero element still fits, or ``default`` if there is none.
    """
    total = int(hist.sum())
    if total == 0:
        return default
    need = math.ceil(clip_rate * total - 1e-9)
    need = max(need, 1)
    # fit_count(e) = number of elements with max-fitting exponent >= e
    cum = np.cumsum(hist[::-1])[::-1]
    fits = np.nonzero(cum >= need)[0]
    best = int(fits[-1]) + _EXP_LO
    if best >= _EXP_HI:
        nonzero_bins = np.nonzero(hist[:-1])[0]
        if nonzero_bins.size == 0:
            return default
        best = int(nonzero_bins[-1]) + _EXP_LO
    return best


def calibrate_activation_exp(
    samples: list[FTensor],
    bits: int,
    clip_rate: float,
    default: int = 0,
) -> int:
    """Largest exponent keeping at least clip_rate of all sampled elements
    within the signed range of ``bits``, pooled across every sample tensor.

    All-zero samples return ``default``.
    """
    if not samples:
        raise ConfigError("calibration requires at least one sample tensor")
    if not (0.0 < clip_rate <= 1.0):
        raise ConfigError(f"clip_rate must be in (0, 1], got {clip_rate}")
    hist = np.zeros(_EXP_HI - _EXP_LO + 1, dtype=np.int64)
    for t in samples:
        hist += exponent_histogram(t.array, bits)
    return exponent_from_histogram(hist, clip_rate, default=default)


def param_exponent(t: FTensor, bits: int, default: int = 0) -> int:
    """Largest exponent at which every value of a parameter tensor fits."""
    return calibrate_activation_exp([t], bits, 1.0, default=default)


# ---------------------------------------------------------------------------
# Batch-norm folding


def fold_batchnorm(
    conv_w: FTensor,
    conv_b: FTensor,
    bn_gamma: FTensor,
    bn_beta: FTensor,
    bn_mean: FTensor,
    bn_var: FTensor,
    eps: float = 1e-5,
) -> tuple[FTensor, FTensor]:
    """Absorb a per-channel affine normalization into conv weights/bias.

    Returns (W', b') with W'_c = W_c * g_c and b'_c = (b_c - mean_c) * g_c
    + beta_c where g_c = gamma_c / sqrt(var_c + eps), so that the folded
    convolution equals convolution followed by the normalization.
    """
    w = conv_w.array
    out_ch = w.shape[0]
    parts = {
        "conv_b": conv_b,
        "bn_gamma": bn_gamma,
        "bn_beta": bn_beta,
        "bn_mean": bn_mean,
        "bn_var": bn_var,
    }
    for name, t in parts.items():
        if t.size() != out_ch:
            raise ShapeError(
                f"{name} length {t.size()} does not match {out_ch} output channels"
            )
    var = bn_var.array.ravel()
    if np.any(var < 0):
        raise ShapeError("bn_var must be non-negative")
    g = bn_gamma.array.ravel() / np.sqrt(var + eps)
    w_f = w * g.reshape((out_ch,) + (1,) * (w.ndim - 1))
    b_f = (conv_b.array.ravel() - bn_mean.array.ravel()) * g + bn_beta.array.ravel()
    return FTensor.from_array(w_f), FTensor.from_array(b_f)
