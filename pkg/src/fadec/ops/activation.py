"""Activations: ReLU and LUT-approximated sigmoid / ELU.

The table covers inputs in [-t, t], evenly divided into buckets; each
entry stores the exact function value at the bucket midpoint.  Inputs
outside the range take the closest end entry (ELU passes non-negative
inputs through unchanged - that branch of the function is the identity).
The sigmoid table can be stored half-size over [0, t] because
sigmoid(-x) = 1 - sigmoid(x).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..quantize import clip, round_half_away, rshift_round
from ..tensor import FTensor, QTensor


def relu(x):
    """Elementwise max(v, 0) for FTensor or QTensor (bits/exp preserved)."""
    if isinstance(x, QTensor):
        return QTensor(x.shape, np.maximum(x.array, 0), bits=x.bits, exp=x.exp)
    return FTensor(x.shape, np.maximum(x.array, 0.0))


def sigmoid_exact(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elu_exact(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, x, np.expm1(np.minimum(x, 0.0)))


_EXACT = {"sigmoid": sigmoid_exact, "elu": elu_exact}


@dataclass(frozen=True)
class ActLut:
    """Sampled activation table with fixed-point exponents for quantized use."""

    kind: str
    entries: np.ndarray = field(repr=False)  # float64 midpoint samples
    t: float = 8.0
    half: bool = False  # sigmoid only: entries cover [0, t]
    in_exp: int = 0
    out_exp: int = 0

    def __post_init__(self):
        if self.kind not in _EXACT:
            raise ConfigError(f"unknown activation kind {self.kind!r}")
        if self.half and self.kind != "sigmoid":
            raise ConfigError("half tables exploit sigmoid symmetry only")
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if entries.size < 1:
            raise ConfigError("table must have at least one entry")
        if np.any(np.diff(entries) < 0):
            raise ConfigError(f"{self.kind} table entries must be non-decreasing")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def full_entries(self) -> int:
        return self.entries.size * (2 if self.half else 1)

    @property
    def step(self) -> float:
        return 2.0 * self.t / self.full_entries


def lut_build(kind: str, entries: int = 256, t: float = 8.0, *,
              half: bool = False, in_exp: int = 0, out_exp: int = 0) -> ActLut:
    """Sample the exact function at bucket midpoints over [-t, t].

    The sigmoid table is constructed from its upper half by symmetry, so a
    half table and a full table hold bit-identical values per bucket.
    """
    if entries < 2:
        raise ConfigError("need at least 2 table entries")
    if t <= 0:
        raise ConfigError("input range bound t must be positive")
    step = 2.0 * t / entries
    mids = -t + (np.arange(entries) + 0.5) * step
    if kind == "sigmoid" and entries % 2 == 0:
        upper = sigmoid_exact(mids[entries // 2 :])
        values = np.concatenate([1.0 - upper[::-1], upper])
    else:
        values = _EXACT[kind](mids)
    if half:
        if entries % 2:
            raise ConfigError("half table requires an even entry count")
        values = values[entries // 2 :]
    return ActLut(kind=kind, entries=values, t=t, half=half,
                  in_exp=in_exp, out_exp=out_exp)


def _bucket_index(lut: ActLut, x: np.ndarray) -> np.ndarray:
    """Floor mapping of inputs onto [-t, t] buckets; ends absorb out-of-range."""
    n = lut.full_entries
    idx = np.floor((np.asarray(x, dtype=np.float64) + lut.t) / lut.step).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def _bucket_values(lut: ActLut, idx: np.ndarray) -> np.ndarray:
    """Float table value per bucket index, mirroring half tables."""
    if not lut.half:
        return lut.entries[idx]
    n = lut.full_entries
    hi = idx >= n // 2
    out = np.empty(idx.shape, dtype=np.float64)
    out[hi] = lut.entries[idx[hi] - n // 2]
    # values are in [0.5, 1), so 1 - v is exact and matches the full table
    out[~hi] = 1.0 - lut.entries[(n // 2 - 1) - idx[~hi]]
    return out


def lut_query_float(lut: ActLut, x) -> np.ndarray:
    """Float-domain table lookup (the reference the sweeps measure)."""
    x = np.asarray(x, dtype=np.float64)
    out = _bucket_values(lut, _bucket_index(lut, x))
    if lut.kind == "elu":
        out = np.where(x >= 0, x, out)
    return out


def lut_apply(lut: ActLut, x: QTensor) -> QTensor:
    """Quantized lookup: fixed-point input at in_exp, output at out_exp."""
    if x.exp != lut.in_exp:
        raise ConfigError(
            f"input exponent {x.exp} does not match the table's in_exp {lut.in_exp}"
        )
    xf = np.ldexp(x.array.astype(np.float64), -x.exp)
    vals = _bucket_values(lut, _bucket_index(lut, xf))
    out = round_half_away(np.ldexp(vals, lut.out_exp)).astype(np.int64)
    if lut.kind == "elu":
        # non-negative inputs are the identity, requantized to out_exp
        if x.exp >= lut.out_exp:
            ident = rshift_round(x.array, x.exp - lut.out_exp)
        else:
            ident = x.array << (lut.out_exp - x.exp)
        out = np.where(x.array >= 0, ident, out)
    return QTensor(x.shape, clip(out, x.bits), bits=x.bits, exp=lut.out_exp)


# ---------------------------------------------------------------------------
# serialization: a QTZ tensor (entries quantized at out_exp) plus a small
# JSON header; the reloaded table produces bit-identical quantized lookups


def entries_quant(lut: ActLut, bits: int = 16) -> QTensor:
    q = clip(round_half_away(np.ldexp(lut.entries, lut.out_exp)).astype(np.int64),
             bits)
    return QTensor((lut.entries.size,), q, bits=bits, exp=lut.out_exp)


def lut_to_json(lut: ActLut) -> dict:
    return {
        "kind": lut.kind,
        "t": lut.t,
        "half": lut.half,
        "in_exp": lut.in_exp,
        "out_exp": lut.out_exp,
    }


def save_lut(path, lut: ActLut) -> None:
    from ..tensor import save_tensor

    path = str(path)
    with open(path, "w") as f:
        json.dump(lut_to_json(lut), f, sort_keys=True)
    save_tensor(path + ".qtz", entries_quant(lut))


def load_lut(path) -> ActLut:
    from ..tensor import load_tensor

    path = str(path)
    with open(path) as f:
        header = json.load(f)
    q = load_tensor(path + ".qtz")
    return ActLut(
        kind=header["kind"],
        entries=np.ldexp(q.array.astype(np.float64), -q.exp),
        t=float(header["t"]),
        half=bool(header["half"]),
        in_exp=int(header["in_exp"]),
        out_exp=int(header["out_exp"]),
    )
