"""Layer normalization (software-side, floating point).

The whole tensor is scanned once for mean and variance and once more to
normalize, so it stays in float: high precision needs the square root and
division done properly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..tensor import FTensor


def layer_norm(x: FTensor, gamma: FTensor, beta: FTensor, eps: float = 1e-5) -> FTensor:
    """(x - mean) / sqrt(var + eps) * gamma + beta over all axes of x.

    gamma/beta must broadcast against x (scalar or per-channel shaped).
    """
    arr = x.array
    try:
        g = np.broadcast_to(gamma.array, arr.shape)
        b = np.broadcast_to(beta.array, arr.shape)
    except ValueError as e:
        raise ShapeError(f"gamma/beta not broadcastable to {x.shape}: {e}") from e
    mean = arr.mean()
    var = arr.var()
    out = (arr - mean) / np.sqrt(var + eps) * g + b
    return FTensor(x.shape, out)
