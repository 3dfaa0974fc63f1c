"""Grid sampling and spatial up-sampling.

Grid sampling gathers each output pixel from real-valued source
coordinates with four-tap bilinear interpolation; taps that fall outside
the source contribute zero and the weights are never renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..tensor import FTensor, QTensor


@dataclass(frozen=True)
class Grid:
    """H x W x 2 field of (row, col) source coordinates in pixel units."""

    shape: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 3 or shape[2] != 2:
            raise ShapeError(f"grid shape must be HxWx2, got {shape}")
        arr = arr.reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ShapeError("grid coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "Grid":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr)

    @classmethod
    def identity(cls, h: int, w: int) -> "Grid":
        rows, cols = np.meshgrid(np.arange(h, dtype=np.float64),
                                 np.arange(w, dtype=np.float64), indexing="ij")
        return cls.from_array(np.stack([rows, cols], axis=-1))

    @property
    def out_hw(self) -> tuple[int, int]:
        return self.shape[0], self.shape[1]


def grid_sample(x: FTensor, g: Grid) -> FTensor:
    """Four-tap bilinear gather at the grid coordinates.

    Accepts (H, W) or (C, H, W) inputs; the grid applies to every channel.
    """
    arr = x.array
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"grid_sample expects (H,W) or (C,H,W), got {x.shape}")
    c, h, w = arr.shape
    gi = np.floor(g.data[..., 0])
    gj = np.floor(g.data[..., 1])
    k = g.data[..., 0] - gi
    l = g.data[..., 1] - gj
    i0 = gi.astype(np.int64)
    j0 = gj.astype(np.int64)

    def tap(ii, jj):
        inb = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        ic = np.clip(ii, 0, h - 1)
        jc = np.clip(jj, 0, w - 1)
        return arr[:, ic, jc], inb

    w00 = (1.0 - k) * (1.0 - l)
    w01 = (1.0 - k) * l
    w10 = k * (1.0 - l)
    w11 = k * l
    t00, m00 = tap(i0, j0)
    t01, m01 = tap(i0, j0 + 1)
    t10, m10 = tap(i0 + 1, j0)
    t11, m11 = tap(i0 + 1, j0 + 1)
    # fixed summation order; out-of-bounds taps contribute exactly zero
    out = np.where(m00, w00 * t00, 0.0)
    out = out + np.where(m01, w01 * t01, 0.0)
    out = out + np.where(m10, w10 * t10, 0.0)
    out = out + np.where(m11, w11 * t11, 0.0)
    if squeeze:
        out = out[0]
    return FTensor(out.shape, out)


def upsample_nearest(x, factor: int):
    """Replicate each pixel factor x factor; works on FTensor and QTensor."""
    if factor < 1:
        raise ShapeError(f"factor must be positive, got {factor}")
    arr = x.array
    if arr.ndim not in (2, 3):
        raise ShapeError(f"upsample expects (H,W) or (C,H,W), got {x.shape}")
    out = np.repeat(np.repeat(arr, factor, axis=-2), factor, axis=-1)
    if isinstance(x, QTensor):
        return QTensor(out.shape, out, bits=x.bits, exp=x.exp)
    return FTensor(out.shape, out)


def upsample_bilinear(x: FTensor, factor: int) -> FTensor:
    """Bilinear upsampling, half-pixel-centres convention (align_corners
    false): output pixel o samples source coordinate (o + 0.5)/factor - 0.5,
    with edge taps clamped.  Float only."""
    if factor < 1:
        raise ShapeError(f"factor must be positive, got {factor}")
    if factor == 1:
        return FTensor(x.shape, x.array)
    arr = x.array
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"upsample expects (H,W) or (C,H,W), got {x.shape}")
    c, h, w = arr.shape

    def axis_taps(n_in, n_out):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) / factor - 0.5
        lo = np.floor(src).astype(np.int64)
        frac = src - lo
        lo0 = np.clip(lo, 0, n_in - 1)
        lo1 = np.clip(lo + 1, 0, n_in - 1)
        return lo0, lo1, frac

    r0, r1, fr = axis_taps(h, h * factor)
    c0, c1, fc = axis_taps(w, w * factor)
    top = arr[:, r0][:, :, c0] * (1 - fc) + arr[:, r0][:, :, c1] * fc
    bot = arr[:, r1][:, :, c0] * (1 - fc) + arr[:, r1][:, :, c1] * fc
    out = top * (1 - fr)[None, :, None] + bot * fr[None, :, None]
    if squeeze:
        out = out[0]
    return FTensor(out.shape, out)
