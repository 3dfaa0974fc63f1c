import math

import numpy as np
import pytest

from fadec.errors import ShapeError
from fadec.ops import Grid
from fadec.pipeline import (
    ConvLSTMWeights,
    LSTMState,
    convlstm_step,
    hidden_state_warp,
)
from fadec.tensor import FTensor


def F(x):
    return FTensor.from_array(np.asarray(x, dtype=np.float64))


def make_weights(rng, ch, zero=False):
    def noise(shape, scale=0.2):
        return np.zeros(shape) if zero else rng.normal(0, scale, size=shape)

    return ConvLSTMWeights(
        conv_w=F(noise((4 * ch, 2 * ch, 3, 3))),
        conv_b=F(noise((4 * ch,))),
        conv_s=F(np.ones(1)),
        ln_gates_gamma=F(1.0 + noise((4 * ch, 1, 1), 0.05)),
        ln_gates_beta=F(noise((4 * ch, 1, 1), 0.05)),
        ln_cell_gamma=F(1.0 + noise((ch, 1, 1), 0.05)),
        ln_cell_beta=F(noise((ch, 1, 1), 0.05)),
    )


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def elu(v):
    return v if v >= 0 else math.exp(v) - 1.0


def test_zero_dynamics_fixed_point():
    rng = np.random.default_rng(0)
    ch, h, w = 3, 4, 4
    weights = make_weights(rng, ch, zero=True)
    # zero weights/biases: every gate is sigmoid(0) = 0.5, candidate is
    # ELU(0) = 0, so with a zero prior cell the raw new cell is zero
    state = LSTMState.zeros((ch, h, w))
    new_state, h_new = convlstm_step(state, F(np.zeros((ch, h, w))), weights)
    assert np.allclose(new_state.cell.array, 0.0)
    assert np.allclose(h_new.array, 0.0)
    assert np.allclose(new_state.hidden.array, h_new.array)


def test_operator_census_of_one_step():
    rng = np.random.default_rng(1)
    ch = 2
    weights = make_weights(rng, ch)
    state = LSTMState.zeros((ch, 3, 3))
    trace = []
    convlstm_step(state, F(rng.normal(size=(ch, 3, 3))), weights, trace=trace)
    counts = {}
    for proc, kind in trace:
        assert proc == "CL"
        counts[kind] = counts.get(kind, 0) + 1
    assert counts == {
        "conv": 1, "sigmoid": 3, "elu": 2, "add": 1, "mul": 3,
        "concat": 1, "slice": 4, "layer_norm": 2,
    }


def scalar_reference_step(state, x, weights, eps=1e-5):
    """Straight-line scalar implementation of the same gate equations."""
    ch, hh, ww = x.shape
    cat = np.concatenate([x, state.hidden.array], axis=0)
    w = weights.conv_w.array
    b = weights.conv_b.array
    s = float(weights.conv_s.array.ravel()[0])
    gates = np.zeros((4 * ch, hh, ww))
    for oc in range(4 * ch):
        for i in range(hh):
            for j in range(ww):
                acc = 0.0
                for ic in range(2 * ch):
                    for di in range(3):
                        for dj in range(3):
                            si, sj = i + di - 1, j + dj - 1
                            if 0 <= si < hh and 0 <= sj < ww:
                                acc += w[oc, ic, di, dj] * cat[ic, si, sj]
                gates[oc, i, j] = (acc + b[oc]) * s
    gm, gv = gates.mean(), gates.var()
    gates = ((gates - gm) / math.sqrt(gv + eps) * weights.ln_gates_gamma.array
             + weights.ln_gates_beta.array)
    pre_i, pre_f, pre_g, pre_o = (gates[k * ch:(k + 1) * ch] for k in range(4))
    gi = np.vectorize(sigmoid)(pre_i)
    gf = np.vectorize(sigmoid)(pre_f)
    gg = np.vectorize(elu)(pre_g)
    go = np.vectorize(sigmoid)(pre_o)
    c_raw = gf * state.cell.array + gi * gg
    cm, cv = c_raw.mean(), c_raw.var()
    c_new = ((c_raw - cm) / math.sqrt(cv + eps) * weights.ln_cell_gamma.array
             + weights.ln_cell_beta.array)
    h_new = go * np.vectorize(elu)(c_new)
    return c_new, h_new


def test_matches_scalar_reference():
    rng = np.random.default_rng(2)
    ch, h, w = 2, 4, 5
    weights = make_weights(rng, ch)
    state = LSTMState(
        cell=F(rng.normal(size=(ch, h, w))),
        hidden=F(rng.normal(size=(ch, h, w))),
    )
    x = F(rng.normal(size=(ch, h, w)))
    new_state, h_new = convlstm_step(state, x, weights)
    want_c, want_h = scalar_reference_step(state, x.array, weights)
    assert np.max(np.abs(new_state.cell.array - want_c)) < 1e-5
    assert np.max(np.abs(h_new.array - want_h)) < 1e-5


def test_state_shape_mismatch():
    rng = np.random.default_rng(3)
    weights = make_weights(rng, 2)
    state = LSTMState.zeros((2, 3, 3))
    with pytest.raises(ShapeError):
        convlstm_step(state, F(np.zeros((2, 4, 4))), weights)


# ---------------------------------------------------------------------------
# hidden-state warp


def test_identity_grid_leaves_state_unchanged():
    rng = np.random.default_rng(4)
    state = LSTMState(cell=F(rng.normal(size=(2, 4, 4))),
                      hidden=F(rng.normal(size=(2, 4, 4))))
    out = hidden_state_warp(state, Grid.identity(4, 4))
    assert np.array_equal(out.hidden.array, state.hidden.array)
    assert np.array_equal(out.cell.array, state.cell.array)


def test_out_of_bounds_grid_zeroes_hidden_preserves_cell():
    rng = np.random.default_rng(5)
    state = LSTMState(cell=F(rng.normal(size=(1, 3, 3))),
                      hidden=F(rng.normal(size=(1, 3, 3))))
    far = Grid.from_array(np.full((3, 3, 2), 1e9))
    out = hidden_state_warp(state, far)
    assert np.allclose(out.hidden.array, 0.0)
    assert np.array_equal(out.cell.array, state.cell.array)


def test_warp_delegates_to_grid_sample():
    from fadec.ops import grid_sample

    rng = np.random.default_rng(6)
    state = LSTMState(cell=F(rng.normal(size=(2, 5, 5))),
                      hidden=F(rng.normal(size=(2, 5, 5))))
    g = Grid.from_array(rng.uniform(-1, 6, size=(5, 5, 2)))
    out = hidden_state_warp(state, g)
    assert np.array_equal(out.hidden.array, grid_sample(state.hidden, g).array)


def test_warp_grid_shape_mismatch():
    state = LSTMState.zeros((1, 3, 3))
    with pytest.raises(ShapeError):
        hidden_state_warp(state, Grid.identity(4, 4))
