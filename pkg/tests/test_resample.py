import numpy as np
import pytest

from fadec.errors import ShapeError
from fadec.ops import Grid, grid_sample, upsample_bilinear, upsample_nearest
from fadec.tensor import FTensor, QTensor
from oracle_lib import grid_sample_loop


def F(x):
    return FTensor.from_array(np.asarray(x, dtype=np.float64))


def test_grid_validation():
    with pytest.raises(ShapeError):
        Grid.from_array(np.zeros((2, 2, 3)))
    with pytest.raises(ShapeError):
        Grid.from_array(np.full((2, 2, 2), np.inf))


def test_identity_grid_reproduces_input_bit_exact():
    rng = np.random.default_rng(0)
    x = F(rng.normal(size=(3, 5, 7)))
    g = Grid.identity(5, 7)
    assert np.array_equal(grid_sample(x, g).array, x.array)


def test_midpoint_example():
    x = F([[0.0, 0.0], [0.0, 4.0]])
    g = Grid.from_array(np.array([[[0.5, 0.5]]]))
    assert grid_sample(x, g).array.tolist() == [[1.0]]


def test_integer_grids_are_pure_gathers():
    rng = np.random.default_rng(1)
    x = F(rng.normal(size=(2, 6, 6)))
    ii = rng.integers(0, 6, size=(4, 4)).astype(np.float64)
    jj = rng.integers(0, 6, size=(4, 4)).astype(np.float64)
    g = Grid.from_array(np.stack([ii, jj], axis=-1))
    out = grid_sample(x, g).array
    want = x.array[:, ii.astype(int), jj.astype(int)]
    assert np.array_equal(out, want)


def test_out_of_bounds_taps_contribute_zero():
    x = F(np.ones((1, 3, 3)))
    g = Grid.from_array(np.array([[[-10.0, -10.0], [2.5, 2.5]]]))
    out = grid_sample(x, g).array
    assert out[0, 0, 0] == 0.0
    assert out[0, 0, 1] == 0.25  # only the in-bounds corner tap remains


def test_grid_sample_matches_loop_oracle_exactly():
    rng = np.random.default_rng(2)
    for _ in range(200):
        c = int(rng.integers(1, 4))
        h, w = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        x = rng.normal(size=(c, h, w))
        g = rng.uniform(-2, max(h, w) + 1, size=(int(rng.integers(1, 6)), int(rng.integers(1, 6)), 2))
        got = grid_sample(F(x), Grid.from_array(g)).array
        want = grid_sample_loop(x, g)
        assert np.array_equal(got, want)


# ---------------------------------------------------------------------------
# upsampling


def test_upsample_nearest_factor1_identity():
    x = F(np.arange(4.0).reshape(2, 2))
    assert np.array_equal(upsample_nearest(x, 1).array, x.array)


def test_upsample_nearest_block_replication():
    x = F([[1.0, 2.0], [3.0, 4.0]])
    out = upsample_nearest(x, 2).array
    want = np.array([[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float)
    assert np.array_equal(out, want)
    one = upsample_nearest(F([[5.0]]), 2).array
    assert np.array_equal(one, np.full((2, 2), 5.0))


def test_upsample_nearest_quantized_passthrough():
    q = QTensor.from_array([[1, -2]], bits=8, exp=3)
    out = upsample_nearest(q, 2)
    assert (out.bits, out.exp) == (8, 3)
    assert out.array.tolist() == [[1, 1, -2, -2], [1, 1, -2, -2]]


def test_upsample_bilinear_identity_and_constant():
    x = F(np.arange(6.0).reshape(2, 3))
    assert np.array_equal(upsample_bilinear(x, 1).array, x.array)
    c = F(np.full((1, 3, 4), 2.5))
    assert np.allclose(upsample_bilinear(c, 3).array, 2.5)


def test_upsample_bilinear_reproduces_affine_interior():
    # bilinear interpolation reproduces affine functions wherever no tap
    # is clamped at the border
    h, w, f = 6, 5, 2
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    x = F((1.5 * rows - 0.7 * cols + 0.3)[None])
    out = upsample_bilinear(x, f).array[0]
    orow = (np.arange(h * f) + 0.5) / f - 0.5
    ocol = (np.arange(w * f) + 0.5) / f - 0.5
    rr, cc = np.meshgrid(orow, ocol, indexing="ij")
    want = 1.5 * rr - 0.7 * cc + 0.3
    interior = ((rr >= 0) & (rr <= h - 1) & (cc >= 0) & (cc <= w - 1))
    assert np.allclose(out[interior], want[interior], atol=1e-12)
