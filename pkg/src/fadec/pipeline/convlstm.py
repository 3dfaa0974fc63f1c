"""Convolutional LSTM cell and hidden-state viewpoint correction.

The step uses exactly one 3x3 convolution on the concatenated input and
hidden state, a four-way channel slice into sigmoid i/f/o gates and an
ELU candidate, and the usual gated cell update.  Layer normalization is
applied to the convolution pre-activations and to the new cell state,
and the normalized cell is what gets carried to the next frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..ops import (
    ConvSpec,
    Grid,
    concat,
    conv2d_float,
    elu_exact,
    grid_sample,
    layer_norm,
    sigmoid_exact,
    slice_axis,
)
from ..tensor import FTensor


@dataclass(frozen=True)
class LSTMState:
    """Carried recurrent state; cell and hidden always share a shape.

    Holds FTensors on the float path and QTensors on the quantized path.
    """

    cell: FTensor
    hidden: FTensor

    def __post_init__(self):
        if self.cell.shape != self.hidden.shape:
            raise ShapeError("cell and hidden state shapes must match")

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "LSTMState":
        z = FTensor.from_array(np.zeros(shape))
        return cls(cell=z, hidden=z)


@dataclass
class ConvLSTMWeights:
    conv_w: FTensor
    conv_b: FTensor
    conv_s: FTensor
    ln_gates_gamma: FTensor
    ln_gates_beta: FTensor
    ln_cell_gamma: FTensor
    ln_cell_beta: FTensor
    eps: float = 1e-5

    @classmethod
    def from_params(cls, params: dict, eps: float = 1e-5) -> "ConvLSTMWeights":
        return cls(
            conv_w=params["cl.gates.w"],
            conv_b=params["cl.gates.b"],
            conv_s=params["cl.gates.s"],
            ln_gates_gamma=params["cl.ln_g.gamma"],
            ln_gates_beta=params["cl.ln_g.beta"],
            ln_cell_gamma=params["cl.ln_c.gamma"],
            ln_cell_beta=params["cl.ln_c.beta"],
            eps=eps,
        )


def convlstm_step(
    state: LSTMState,
    x: FTensor,
    weights: ConvLSTMWeights,
    trace: list | None = None,
) -> tuple[LSTMState, FTensor]:
    """One recurrent step; returns (new state, new hidden).

    ``trace`` collects one ("CL", kind) entry per operator instance.
    """
    ch = x.shape[0]
    if state.hidden.shape != x.shape:
        raise ShapeError(
            f"state shape {state.hidden.shape} does not match input {x.shape}"
        )

    def rec(kind):
        if trace is not None:
            trace.append(("CL", kind))

    cat = concat([x, state.hidden], axis=0)
    rec("concat")
    spec = ConvSpec(3, 1, 2 * ch, 4 * ch)
    gates = conv2d_float(cat, spec, weights.conv_w, weights.conv_b, weights.conv_s)
    rec("conv")
    gates = layer_norm(gates, weights.ln_gates_gamma, weights.ln_gates_beta, weights.eps)
    rec("layer_norm")
    pre = []
    for k in range(4):
        pre.append(slice_axis(gates, 0, k * ch, (k + 1) * ch))
        rec("slice")
    gate_i = FTensor(pre[0].shape, sigmoid_exact(pre[0].array))
    rec("sigmoid")
    gate_f = FTensor(pre[1].shape, sigmoid_exact(pre[1].array))
    rec("sigmoid")
    cand = FTensor(pre[2].shape, elu_exact(pre[2].array))
    rec("elu")
    gate_o = FTensor(pre[3].shape, sigmoid_exact(pre[3].array))
    rec("sigmoid")
    fc = FTensor(gate_f.shape, gate_f.array * state.cell.array)
    rec("mul")
    ig = FTensor(gate_i.shape, gate_i.array * cand.array)
    rec("mul")
    c_raw = FTensor(fc.shape, fc.array + ig.array)
    rec("add")
    c_new = layer_norm(c_raw, weights.ln_cell_gamma, weights.ln_cell_beta, weights.eps)
    rec("layer_norm")
    ec = FTensor(c_new.shape, elu_exact(c_new.array))
    rec("elu")
    h_new = FTensor(gate_o.shape, gate_o.array * ec.array)
    rec("mul")
    return LSTMState(cell=c_new, hidden=h_new), h_new


def hidden_state_warp(state: LSTMState, grid: Grid) -> LSTMState:
    """Re-observe the hidden state through a warp grid; the cell state is
    carried unchanged."""
    if grid.out_hw != state.hidden.shape[-2:]:
        raise ShapeError(
            f"grid {grid.out_hw} does not match hidden spatial dims "
            f"{state.hidden.shape[-2:]}"
        )
    return LSTMState(cell=state.cell, hidden=grid_sample(state.hidden, grid))
