import numpy as np
import pytest

from fadec.errors import ConfigError, ShapeError
from fadec.ops import (
    LEGAL_CONV_SHAPES,
    ConvSpec,
    ConvSpec as CS,
    accumulator_bound,
    check_accumulator_width,
    conv2d_float,
    conv2d_quant,
    conv_output_hw,
)
from fadec.quantize import dequantize_tensor, quantize_tensor
from fadec.tensor import FTensor, QTensor
from oracle_lib import conv2d_loop


def F(x):
    return FTensor.from_array(np.asarray(x, dtype=np.float64))


def test_spec_restricted_to_legal_pairs():
    for k, s in LEGAL_CONV_SHAPES:
        ConvSpec(k, s, 1, 1)
    for k, s in ((1, 2), (7, 1), (3, 3), (2, 1)):
        with pytest.raises(ConfigError):
            ConvSpec(k, s, 1, 1)


def test_default_padding_keeps_size_for_stride1_and_halves_for_stride2():
    for k, s in LEGAL_CONV_SHAPES:
        spec = ConvSpec(k, s, 1, 1)
        oh, ow = conv_output_hw(spec, 16, 12)
        if s == 1:
            assert (oh, ow) == (16, 12)
        else:
            assert (oh, ow) == (8, 6)


def test_output_size_formula_exhaustive_small_shapes():
    # formula vs direct enumeration of valid window positions
    for k, s in sorted(LEGAL_CONV_SHAPES):
        for h in range(1, 8):
            for w in range(1, 8):
                for pad in range(0, 3):
                    n_h = len(range(0, h + 2 * pad - k + 1, s))
                    n_w = len(range(0, w + 2 * pad - k + 1, s))
                    if n_h <= 0 or n_w <= 0:
                        continue
                    spec = ConvSpec(k, s, 1, 1, padding=pad)
                    assert conv_output_hw(spec, h, w) == (n_h, n_w)


def test_identity_1x1_conv():
    x = F(np.arange(12.0).reshape(1, 3, 4))
    spec = ConvSpec(1, 1, 1, 1)
    y = conv2d_float(x, spec, F(np.ones((1, 1, 1, 1))), F([0.0]), F([1.0]))
    assert np.array_equal(y.array, x.array)


def test_averaging_filter_constant_input():
    c = 3.7
    x = F(np.full((1, 6, 6), c))
    w = F(np.full((1, 1, 3, 3), 1.0 / 9.0))
    y = conv2d_float(x, ConvSpec(3, 1, 1, 1), w, F([0.0]), F([1.0]))
    assert np.allclose(y.array[0, 1:-1, 1:-1], c)


def test_float_conv_matches_loop_oracle():
    rng = np.random.default_rng(21)
    for k, s in sorted(LEGAL_CONV_SHAPES):
        in_ch, out_ch = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        spec = ConvSpec(k, s, in_ch, out_ch)
        x = rng.normal(size=(in_ch, 8, 7))
        w = rng.normal(size=(out_ch, in_ch, k, k))
        b = rng.normal(size=out_ch)
        sc = rng.normal(size=out_ch)
        got = conv2d_float(F(x), spec, F(w), F(b), F(sc)).array
        want = conv2d_loop(x, w, b, sc, s, spec.padding)
        assert np.max(np.abs(got - want)) < 1e-6


def test_shape_mismatch_raises():
    spec = ConvSpec(3, 1, 2, 1)
    x = F(np.zeros((1, 4, 4)))
    w = F(np.zeros((1, 2, 3, 3)))
    with pytest.raises(ShapeError):
        conv2d_float(x, spec, w, F([0.0]), F([1.0]))


# ---------------------------------------------------------------------------
# quantized form


def test_quant_conv_identity_case():
    x = QTensor.from_array(np.arange(-8, 8).reshape(1, 4, 4), bits=16, exp=0)
    spec = ConvSpec(1, 1, 1, 1)
    w = QTensor.from_array(np.ones((1, 1, 1, 1)), bits=8, exp=0)
    b = QTensor.from_array([0], bits=32, exp=0)
    s = QTensor.from_array([1], bits=8, exp=0)
    y = conv2d_quant(x, spec, w, b, s, r=0)
    assert np.array_equal(y.array, x.array)


def test_quant_conv_hand_example():
    # m1 = 3*2 + 1 = 7; m2 = 7*5 = 35; rshift_round(35, 2) = 9
    x = QTensor.from_array(np.array([[[2]]]), bits=16, exp=0)
    spec = ConvSpec(1, 1, 1, 1, padding=0)
    w = QTensor.from_array(np.array([[[[3]]]]), bits=8, exp=0)
    b = QTensor.from_array([1], bits=32, exp=0)
    s = QTensor.from_array([5], bits=8, exp=0)
    y = conv2d_quant(x, spec, w, b, s, r=2)
    assert y.array.tolist() == [[[9]]]
    assert y.exp == -2


def test_quant_conv_negative_shift_rejected():
    x = QTensor.from_array(np.array([[[2]]]), bits=16, exp=0)
    spec = ConvSpec(1, 1, 1, 1, padding=0)
    w = QTensor.from_array(np.array([[[[3]]]]), bits=8, exp=0)
    b = QTensor.from_array([1], bits=32, exp=0)
    s = QTensor.from_array([5], bits=8, exp=0)
    with pytest.raises(ConfigError):
        conv2d_quant(x, spec, w, b, s, r=-1)


def test_quant_conv_misaligned_bias_rejected():
    x = QTensor.from_array(np.array([[[2]]]), bits=16, exp=1)
    spec = ConvSpec(1, 1, 1, 1, padding=0)
    w = QTensor.from_array(np.array([[[[3]]]]), bits=8, exp=2)
    b = QTensor.from_array([1], bits=32, exp=0)
    s = QTensor.from_array([5], bits=8, exp=0)
    with pytest.raises(ConfigError):
        conv2d_quant(x, spec, w, b, s, r=0)


def quant_conv_error_bound(xf, wf, bf, sf, spec, ex, ew, eb, es, ey):
    """Conservative per-element bound: half-step input/weight/bias/scale
    quantization errors propagated through m1, the scale product, and the
    final rounding shift."""
    dx, dw, db, ds = 0.5 / 2**ex, 0.5 / 2**ew, 0.5 / 2**eb, 0.5 / 2**es
    ones = np.ones_like(xf)
    absx = np.abs(xf)
    absw = np.abs(wf)
    taps = spec.in_ch * spec.kernel * spec.kernel
    t_w = conv2d_loop(absx, absw, 0.0, 1.0, spec.stride, spec.padding)  # sum |w||x|
    t_x = conv2d_loop(ones, np.ones_like(wf), 0.0, 1.0, spec.stride, spec.padding)
    m1_err = t_w * 0 + conv2d_loop(absx, np.full_like(wf, dw), 0.0, 1.0, spec.stride, spec.padding)
    m1_err += conv2d_loop(np.full_like(xf, dx), absw, 0.0, 1.0, spec.stride, spec.padding)
    m1_err += t_x * dx * dw + db
    m1_f = conv2d_loop(xf, wf, bf, 1.0, spec.stride, spec.padding)
    scol = np.broadcast_to(np.asarray(sf).ravel(), (spec.out_ch,)).reshape(-1, 1, 1)
    m2_err = m1_err * (np.abs(scol) + ds) + np.abs(m1_f) * ds
    return m2_err + 0.5 / 2**ey


def test_quant_conv_within_analytic_bound_of_float():
    rng = np.random.default_rng(33)
    for k, s in sorted(LEGAL_CONV_SHAPES):
        for _ in range(10):
            in_ch, out_ch = int(rng.integers(1, 4)), int(rng.integers(1, 3))
            spec = ConvSpec(k, s, in_ch, out_ch)
            xf = rng.uniform(-1, 1, size=(in_ch, 6, 6))
            wf = rng.uniform(-1, 1, size=(out_ch, in_ch, k, k))
            bf = rng.uniform(-1, 1, size=out_ch)
            sf = rng.uniform(0.25, 1.0, size=out_ch)
            ex, ew, es = 10, 6, 6
            eb = ew + ex
            ey = 8  # coarse output keeps everything far from saturation
            q = conv2d_quant(
                quantize_tensor(F(xf), ex, 16),
                spec,
                quantize_tensor(F(wf), ew, 8),
                quantize_tensor(F(bf), eb, 32),
                quantize_tensor(F(sf), es, 8),
                r=ew + ex + es - ey,
            )
            got = dequantize_tensor(q).array
            want = conv2d_loop(xf, wf, bf, sf, s, spec.padding)
            bound = quant_conv_error_bound(xf, wf, bf, sf, spec, ex, ew, eb, es, ey)
            assert np.all(np.abs(got - want) <= bound + 1e-12)


def test_accumulator_width_check():
    spec = ConvSpec(3, 1, 8, 8)
    assert accumulator_bound(spec, 8, 16, 32, 8) < 1 << 62
    check_accumulator_width(spec, 8, 16, 32, 8)
    with pytest.raises(ConfigError):
        check_accumulator_width(ConvSpec(5, 1, 1 << 30, 4), 8, 16, 32, 8)
