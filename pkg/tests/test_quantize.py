import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadec.errors import ConfigError, ShapeError
from fadec.quantize import (
    QuantParams,
    calibrate_activation_exp,
    clip,
    dequantize_tensor,
    fold_batchnorm,
    param_exponent,
    quantize_tensor,
    rshift_round,
)
from fadec.tensor import FTensor, QTensor


def F(x):
    return FTensor.from_array(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# rshift_round


def test_rshift_round_examples():
    assert rshift_round(8, 2) == 2
    assert rshift_round(5, 1) == 3
    assert rshift_round(-5, 1) == -3
    for v in (-7, -1, 0, 1, 123456):
        assert rshift_round(v, 0) == v


def test_rshift_round_array_matches_scalar():
    vals = np.array([-9, -8, -5, -1, 0, 1, 5, 8, 9], dtype=np.int64)
    out = rshift_round(vals, 1)
    assert list(out) == [rshift_round(int(v), 1) for v in vals]


@given(st.integers(-(2**40), 2**40), st.integers(0, 32))
def test_rshift_round_within_half(v, r):
    got = rshift_round(v, r)
    assert abs(got - v / 2**r) <= 0.5


def test_rshift_round_negative_shift_rejected():
    with pytest.raises(ConfigError):
        rshift_round(1, -1)


# ---------------------------------------------------------------------------
# clip


def test_clip_examples():
    assert clip(300, 8) == 127
    assert clip(-300, 8) == -128
    assert clip(5, 8) == 5


@given(st.integers(-(2**40), 2**40), st.integers(2, 32))
def test_clip_idempotent(v, bits):
    once = clip(v, bits)
    assert clip(once, bits) == once


# ---------------------------------------------------------------------------
# quantize / dequantize


def test_quantize_examples():
    q = quantize_tensor(F([0.5]), exp=1, bits=8)
    assert q.array.tolist() == [1]
    q = quantize_tensor(F([1.0]), exp=7, bits=8)
    assert q.array.tolist() == [127]


def test_quantize_rejects_nonfinite():
    t = FTensor((1,), np.array([1.0]))
    object.__setattr__(t, "data", np.array([np.nan]))
    with pytest.raises(ShapeError):
        quantize_tensor(t, exp=0, bits=8)


def test_quantize_dequantize_roundtrip_bound():
    rng = np.random.default_rng(7)
    for exp in (-2, 0, 3, 7):
        t = F(rng.uniform(-0.9, 0.9, size=200))
        q = quantize_tensor(t, exp=exp, bits=16)
        back = dequantize_tensor(q)
        assert np.max(np.abs(back.array - t.array)) <= 2.0**-exp / 2


def test_dequantize_examples():
    assert dequantize_tensor(QTensor.from_array([1], bits=8, exp=1)).array.tolist() == [0.5]
    assert dequantize_tensor(QTensor.from_array([0], bits=8, exp=9)).array.tolist() == [0.0]


def test_quantize_of_dequantize_is_identity():
    rng = np.random.default_rng(8)
    for bits, exp in ((8, 3), (16, 11), (32, 20)):
        lo, hi = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
        q = QTensor.from_array(rng.integers(lo, hi + 1, size=64), bits=bits, exp=exp)
        q2 = quantize_tensor(dequantize_tensor(q), exp=exp, bits=bits)
        assert np.array_equal(q2.array, q.array)


# ---------------------------------------------------------------------------
# calibration


def test_calibrate_worked_example():
    samples = [F([0.1, 0.2, 0.4, 0.8])]
    assert calibrate_activation_exp(samples, bits=8, clip_rate=0.95) == 7


def test_calibrate_single_value():
    assert calibrate_activation_exp([F([1.0])], bits=8, clip_rate=1.0) == 6


def test_calibrate_all_zero_returns_default():
    assert calibrate_activation_exp([F([0.0, 0.0])], bits=8, clip_rate=0.95) == 0
    assert calibrate_activation_exp([F([0.0])], bits=8, clip_rate=1.0, default=5) == 5


def test_calibrate_result_satisfies_definition():
    rng = np.random.default_rng(11)
    vals = rng.uniform(-4, 4, size=500)
    bits, rate = 8, 0.9
    e = calibrate_activation_exp([F(vals)], bits=bits, clip_rate=rate)
    hi = 2 ** (bits - 1) - 1

    def frac_fit(ex):
        rounded = np.copysign(np.floor(np.abs(vals * 2.0**ex) + 0.5), vals)
        return np.mean(np.abs(rounded) <= hi)

    assert frac_fit(e) >= rate
    assert frac_fit(e + 1) < rate


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_calibrate_monotone_in_clip_rate(seed):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-8, 8, size=64)
    samples = [F(vals)]
    exps = [calibrate_activation_exp(samples, bits=8, clip_rate=r)
            for r in (1.0, 0.95, 0.8, 0.5)]
    # reducing the clip rate never decreases the exponent
    assert all(a <= b for a, b in zip(exps, exps[1:]))


def test_param_exponent_fits_all_values():
    t = F([0.3, -0.7, 0.05])
    e = param_exponent(t, bits=8)
    q = quantize_tensor(t, exp=e, bits=8)
    # no saturation at the chosen exponent, saturation at the next one
    assert np.max(np.abs(q.array)) <= 127
    assert np.max(np.abs(np.round(t.array * 2.0 ** (e + 1)))) > 127


# ---------------------------------------------------------------------------
# QuantParams


def test_quant_params_defaults():
    p = QuantParams()
    assert (p.weight_bits, p.bias_bits, p.scale_bits, p.act_bits) == (8, 32, 8, 16)
    assert p.clip_rate == 0.95


def test_quant_params_validation():
    with pytest.raises(ConfigError):
        QuantParams(weight_bits=1)
    with pytest.raises(ConfigError):
        QuantParams(clip_rate=0.0)


# ---------------------------------------------------------------------------
# batch-norm folding


def _rand_conv_bn(rng, out_ch=4, in_ch=3, k=3):
    w = F(rng.normal(size=(out_ch, in_ch, k, k)))
    b = F(rng.normal(size=out_ch))
    gamma = F(rng.uniform(0.5, 2.0, size=out_ch))
    beta = F(rng.normal(size=out_ch))
    mean = F(rng.normal(size=out_ch))
    var = F(rng.uniform(0.01, 4.0, size=out_ch))
    return w, b, gamma, beta, mean, var


def test_fold_identity_bn():
    rng = np.random.default_rng(3)
    w = F(rng.normal(size=(2, 3, 3, 3)))
    b = F(rng.normal(size=2))
    one = F([1.0, 1.0])
    zero = F([0.0, 0.0])
    wf, bf = fold_batchnorm(w, b, one, zero, zero, one, eps=0.0)
    assert np.allclose(wf.array, w.array)
    assert np.allclose(bf.array, b.array)


def test_fold_pure_scale():
    rng = np.random.default_rng(4)
    w = F(rng.normal(size=(2, 1, 1, 1)))
    b = F(rng.normal(size=2))
    two = F([2.0, 2.0])
    zero = F([0.0, 0.0])
    one = F([1.0, 1.0])
    wf, bf = fold_batchnorm(w, b, two, zero, zero, one, eps=0.0)
    assert np.allclose(wf.array, 2 * w.array)
    assert np.allclose(bf.array, 2 * b.array)


def test_fold_matches_composition_100_instances():
    from fadec.ops import ConvSpec, conv2d_float

    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        out_ch, in_ch = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        k = int(rng.choice([1, 3]))
        w, b, gamma, beta, mean, var = _rand_conv_bn(rng, out_ch, in_ch, k)
        eps = 1e-5
        wf, bf = fold_batchnorm(w, b, gamma, beta, mean, var, eps=eps)
        x = F(rng.normal(size=(in_ch, 6, 6)))
        spec = ConvSpec(k, 1, in_ch, out_ch)
        one = F([1.0])
        folded = conv2d_float(x, spec, wf, bf, one).array
        raw = conv2d_float(x, spec, w, b, one).array
        g = (gamma.array / np.sqrt(var.array + eps)).reshape(-1, 1, 1)
        composed = (raw - mean.array.reshape(-1, 1, 1)) * g + beta.array.reshape(-1, 1, 1)
        rel = np.max(np.abs(folded - composed) / (np.abs(composed) + 1e-6))
        worst = max(worst, rel)
    assert worst <= 1e-5


def test_fold_shape_mismatch():
    rng = np.random.default_rng(6)
    w, b, gamma, beta, mean, var = _rand_conv_bn(rng)
    bad = F(np.ones(3))
    with pytest.raises(ShapeError):
        fold_batchnorm(w, b, bad, beta, mean, var)
