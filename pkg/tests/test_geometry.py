import numpy as np
import pytest

from fadec.errors import ShapeError
from fadec.ops import Grid, grid_sample
from fadec.pipeline import Pose, build_warp_grid, pose_distance, scale_intrinsics
from fadec.pipeline.geometry import rotation_angle
from fadec.pipeline.keyframe import KeyframeBuffer
from fadec.tensor import FTensor


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def intr(h=96, w=64):
    f = 0.9 * max(h, w)
    return np.array([[f, 0, (w - 1) / 2], [0, f, (h - 1) / 2], [0, 0, 1.0]])


# ---------------------------------------------------------------------------
# Pose


def test_pose_validation():
    with pytest.raises(ShapeError):
        Pose(np.zeros((4, 4)))
    bad = np.eye(4)
    bad[:3, :3] *= 1.5  # not orthonormal
    with pytest.raises(ShapeError):
        Pose(bad)
    Pose.from_rt(rot_z(0.3), [1, 2, 3])


def test_pose_inverse():
    p = Pose.from_rt(rot_z(0.7), [0.5, -1.0, 2.0])
    assert np.allclose(p.inverse_matrix() @ p.matrix, np.eye(4), atol=1e-12)


def test_pose_distance_metric():
    a = Pose.identity()
    b = Pose.from_rt(np.eye(3), [3, 4, 0])
    assert pose_distance(a, b) == pytest.approx(5.0)
    c = Pose.from_rt(rot_z(0.25), [0, 0, 0])
    assert pose_distance(a, c) == pytest.approx(0.25, abs=1e-9)
    assert pose_distance(a, c, rotation_weight=2.0) == pytest.approx(0.5, abs=1e-9)
    assert rotation_angle(np.eye(3), np.eye(3)) == 0.0


# ---------------------------------------------------------------------------
# warp grids


def test_identity_pose_gives_identity_grid_for_every_depth():
    p = Pose.from_rt(rot_z(0.2), [1.0, 2.0, 3.0])
    for depth in (0.3, 1.0, 7.5):
        g = build_warp_grid(p, p, intr(), depth, (6, 5))
        assert np.array_equal(g.data, Grid.identity(6, 5).data)


def test_warp_consistency_grid_sample_is_identity():
    rng = np.random.default_rng(0)
    p = Pose.from_rt(rot_z(-0.4), [0.3, 0.1, -0.2])
    x = FTensor.from_array(rng.normal(size=(2, 8, 8)))
    g = build_warp_grid(p, p, intr(8, 8), 2.0, (8, 8))
    assert np.array_equal(grid_sample(x, g).array, x.array)


def test_axial_translation_is_uniform_scaling_about_principal_point():
    k = intr(16, 12)
    d, tz = 2.0, 0.5
    dst = Pose.identity()
    src = Pose.from_rt(np.eye(3), [0, 0, -tz])  # source camera behind dst
    g = build_warp_grid(src, dst, k, d, (16, 12))
    cx, cy = k[0, 2], k[1, 2]
    scale = d / (d + tz)
    rows, cols = np.meshgrid(np.arange(16.0), np.arange(12.0), indexing="ij")
    want_r = cy + (rows - cy) * scale
    want_c = cx + (cols - cx) * scale
    assert np.allclose(g.data[..., 0], want_r, atol=1e-9)
    assert np.allclose(g.data[..., 1], want_c, atol=1e-9)


def test_forward_backward_grid_composition_near_identity():
    # the residual is quadratic in the motion (the constant-depth plane of
    # one view is not the constant-depth plane of the other), so small
    # random pose pairs keep it well under the 1e-3 budget
    rng = np.random.default_rng(1)
    k = intr(24, 16)
    for _ in range(10):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        ang = rng.uniform(-0.005, 0.005)
        kx = np.array([[0, -axis[2], axis[1]],
                       [axis[2], 0, -axis[0]],
                       [-axis[1], axis[0], 0]])
        r = np.eye(3) + np.sin(ang) * kx + (1 - np.cos(ang)) * (kx @ kx)
        src = Pose.from_rt(r, rng.uniform(-0.005, 0.005, 3))
        dst = Pose.identity()
        depth = 2.0
        fwd = build_warp_grid(src, dst, k, depth, (24, 16))
        bwd = build_warp_grid(dst, src, k, depth, (24, 16))
        # evaluate the backward field at the forward coordinates
        bwd_r = grid_sample(FTensor.from_array(bwd.data[..., 0]), fwd).array
        bwd_c = grid_sample(FTensor.from_array(bwd.data[..., 1]), fwd).array
        ident = Grid.identity(24, 16).data
        inb = ((fwd.data[..., 0] >= 1) & (fwd.data[..., 0] <= 22)
               & (fwd.data[..., 1] >= 1) & (fwd.data[..., 1] <= 14))
        assert np.max(np.abs(bwd_r[inb] - ident[..., 0][inb])) < 1e-3
        assert np.max(np.abs(bwd_c[inb] - ident[..., 1][inb])) < 1e-3


def test_points_behind_camera_land_far_out_of_bounds():
    # source camera turned 180 degrees: everything is behind it
    r = np.diag([1.0, -1.0, -1.0])
    src = Pose.from_rt(r, [0, 0, 0])
    g = build_warp_grid(src, Pose.identity(), intr(8, 8), 1.0, (8, 8))
    x = FTensor.from_array(np.ones((1, 8, 8)))
    assert np.allclose(grid_sample(x, g).array, 0.0)


def test_scale_intrinsics_half_pixel_convention():
    k = intr(96, 64)
    k2 = scale_intrinsics(k, 0.5)
    assert k2[0, 0] == pytest.approx(k[0, 0] / 2)
    assert k2[0, 2] == pytest.approx((k[0, 2] + 0.5) / 2 - 0.5)


def test_invalid_depth_rejected():
    with pytest.raises(ShapeError):
        build_warp_grid(Pose.identity(), Pose.identity(), intr(), 0.0, (4, 4))


# ---------------------------------------------------------------------------
# keyframe buffer


def F(shape, fill=0.0):
    return FTensor.from_array(np.full(shape, fill))


def test_empty_buffer_selects_none():
    kb = KeyframeBuffer(capacity=4)
    assert kb.select(Pose.identity()) is None


def test_identical_pose_selected_with_zero_distance():
    kb = KeyframeBuffer(capacity=4)
    p = Pose.from_rt(rot_z(0.1), [0.1, 0.0, 0.0])
    kb = kb.store(p, F((2, 3, 3), 1.0))
    got = kb.select(p)
    assert got is not None
    assert np.array_equal(got.feature.array, np.full((2, 3, 3), 1.0))


def test_nearer_entry_wins():
    kb = KeyframeBuffer(capacity=4, threshold=1.0)
    near = Pose.from_rt(np.eye(3), [0.1, 0, 0])
    far = Pose.from_rt(np.eye(3), [0.5, 0, 0])
    kb = kb.store(far, F((1, 2, 2), 2.0)).store(near, F((1, 2, 2), 1.0))
    got = kb.select(Pose.identity())
    assert got.feature.array[0, 0, 0] == 1.0


def test_threshold_excludes_everything_far():
    kb = KeyframeBuffer(capacity=2, threshold=0.35)
    kb = kb.store(Pose.from_rt(np.eye(3), [5, 0, 0]), F((1, 2, 2)))
    assert kb.select(Pose.identity()) is None


def test_tie_broken_by_recency():
    kb = KeyframeBuffer(capacity=4)
    p = Pose.identity()
    kb = kb.store(p, F((1, 1, 1), 1.0)).store(p, F((1, 1, 1), 2.0))
    assert kb.select(p).feature.array.ravel()[0] == 2.0


def test_fifo_eviction():
    kb = KeyframeBuffer(capacity=2)
    poses = [Pose.from_rt(np.eye(3), [i * 0.01, 0, 0]) for i in range(3)]
    for i, p in enumerate(poses):
        kb = kb.store(p, F((1, 1, 1), float(i)))
    assert len(kb) == 2
    vals = sorted(e.feature.array.ravel()[0] for e in kb.entries)
    assert vals == [1.0, 2.0]


def test_store_shape_mismatch():
    kb = KeyframeBuffer(capacity=2).store(Pose.identity(), F((1, 2, 2)))
    with pytest.raises(ShapeError):
        kb.store(Pose.identity(), F((1, 3, 3)))


def test_select_n_orders_by_distance():
    kb = KeyframeBuffer(capacity=4, threshold=1.0)
    for i, d in enumerate((0.3, 0.1, 0.2)):
        kb = kb.store(Pose.from_rt(np.eye(3), [d, 0, 0]), F((1, 1, 1), float(i)))
    got = kb.select_n(Pose.identity(), 2)
    assert [e.feature.array.ravel()[0] for e in got] == [1.0, 2.0]
