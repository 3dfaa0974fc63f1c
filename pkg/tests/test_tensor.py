import numpy as np
import pytest

from fadec.errors import ParseError, ShapeError
from fadec.tensor import (
    FTensor,
    QTensor,
    ftensor_from_bytes,
    ftensor_to_bytes,
    load_tensor,
    qtensor_from_bytes,
    qtensor_to_bytes,
    save_tensor,
    tensor_from_b64,
    tensor_to_b64,
)


def test_ftensor_validates_shape_and_finiteness():
    with pytest.raises(ShapeError):
        FTensor((2, 0), np.zeros(0))
    with pytest.raises(ShapeError):
        FTensor((2,), np.array([1.0, np.inf]))
    t = FTensor.from_array(np.arange(6.0).reshape(2, 3))
    assert t.shape == (2, 3)
    assert t.size() == 6


def test_ftensor_is_immutable():
    t = FTensor.from_array(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        t.array[0, 0] = 1.0


def test_qtensor_range_checked_on_construction():
    QTensor.from_array([127, -128], bits=8, exp=0)
    with pytest.raises(ShapeError):
        QTensor.from_array([128], bits=8, exp=0)
    with pytest.raises(ShapeError):
        QTensor.from_array([-129], bits=8, exp=0)
    with pytest.raises(ShapeError):
        QTensor.from_array([0], bits=1, exp=0)


def test_ftz_roundtrip_bit_exact():
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(3, 4, 5)).astype(np.float32).astype(np.float64)
    t = FTensor.from_array(arr)
    buf = ftensor_to_bytes(t)
    t2 = ftensor_from_bytes(buf)
    assert t2.shape == t.shape
    assert ftensor_to_bytes(t2) == buf
    assert np.array_equal(t2.array, t.array)


def test_qtz_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    arr = rng.integers(-30000, 30000, size=(2, 7))
    t = QTensor.from_array(arr, bits=16, exp=-3)
    buf = qtensor_to_bytes(t)
    t2 = qtensor_from_bytes(buf)
    assert t2.bits == 16 and t2.exp == -3
    assert qtensor_to_bytes(t2) == buf
    assert np.array_equal(t2.array, t.array)
    path = tmp_path / "t.qtz"
    save_tensor(path, t)
    t3 = load_tensor(path)
    assert np.array_equal(t3.array, t.array) and t3.exp == t.exp


def test_magic_rejected():
    with pytest.raises(ParseError):
        ftensor_from_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ParseError):
        qtensor_from_bytes(b"FTZ1" + b"\x00" * 16)


def test_b64_transport_roundtrip():
    t = QTensor.from_array([[1, 2], [3, 4]], bits=8, exp=2)
    s = tensor_to_b64(t)
    t2 = tensor_from_b64(s)
    assert isinstance(t2, QTensor)
    assert np.array_equal(t2.array, t.array)
    f = FTensor.from_array([0.5, -1.25])
    assert np.array_equal(tensor_from_b64(tensor_to_b64(f)).array, f.array)
