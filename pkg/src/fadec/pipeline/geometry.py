"""Camera poses and plane-sweep warp grids.

A pose is a 4x4 camera-to-global transform.  Warping re-observes a source
view from a destination view under a planar depth hypothesis:
back-project each destination pixel at that depth, move it through
inverse(src) @ dst, and re-project with the intrinsics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..ops.resample import Grid

# anything projected behind the source camera lands here, far outside any
# image, so sampling it contributes zero
_FAR_OUT = 1.0e9


@dataclass(frozen=True)
class Pose:
    """4x4 rigid camera-to-global transform."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ShapeError(f"pose must be 4x4, got {m.shape}")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise ShapeError("pose bottom row must be (0, 0, 0, 1)")
        r = m[:3, :3]
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-4:
            raise ShapeError("pose rotation block is not orthonormal within 1e-4")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation: np.ndarray, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse_matrix(self) -> np.ndarray:
        """Rigid inverse: [R^T, -R^T t]."""
        out = np.eye(4)
        rt = self.rotation.T
        out[:3, :3] = rt
        out[:3, 3] = -rt @ self.translation
        return out


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle between two rotations, in radians."""
    tr = np.trace(r1.T @ r2)
    return float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))


def pose_distance(a: Pose, b: Pose, rotation_weight: float = 1.0) -> float:
    """Translation norm plus weighted rotation angle."""
    t = float(np.linalg.norm(a.translation - b.translation))
    return t + rotation_weight * rotation_angle(a.rotation, b.rotation)


def check_intrinsics(k: np.ndarray) -> np.ndarray:
    k = np.ascontiguousarray(k, dtype=np.float64)
    if k.shape != (3, 3):
        raise ShapeError(f"intrinsics must be 3x3, got {k.shape}")
    if k[1, 0] != 0 or k[2, 0] != 0 or k[2, 1] != 0:
        raise ShapeError("intrinsics must be upper-triangular")
    if k[0, 0] <= 0 or k[1, 1] <= 0:
        raise ShapeError("focal terms must be positive")
    return k


def default_intrinsics(height: int, width: int) -> np.ndarray:
    """Centered pinhole intrinsics with a plausible focal length."""
    f = 0.9 * max(height, width)
    return np.array([
        [f, 0.0, (width - 1) / 2.0],
        [0.0, f, (height - 1) / 2.0],
        [0.0, 0.0, 1.0],
    ])


def scale_intrinsics(k: np.ndarray, factor: float) -> np.ndarray:
    """Rescale intrinsics to a resolution scaled by ``factor``.

    Pixel centres follow the half-pixel convention: cx' = (cx + 0.5) * f - 0.5.
    """
    out = check_intrinsics(k).copy()
    out[0, 0] *= factor
    out[1, 1] *= factor
    out[0, 2] = (out[0, 2] + 0.5) * factor - 0.5
    out[1, 2] = (out[1, 2] + 0.5) * factor - 0.5
    return out


def build_warp_grid(
    src_pose: Pose,
    dst_pose: Pose,
    intrinsics: np.ndarray,
    depth: float,
    out_shape: tuple[int, int],
) -> Grid:
    """Source-pixel coordinates that re-observe the destination view at a
    planar depth hypothesis.

    Identical poses short-circuit to the identity grid so that sampling is
    a bit-exact copy regardless of the hypothesis depth.
    """
    if depth <= 0:
        raise ShapeError(f"hypothesis depth must be positive, got {depth}")
    h, w = out_shape
    if np.array_equal(src_pose.matrix, dst_pose.matrix):
        return Grid.identity(h, w)
    k = check_intrinsics(intrinsics)
    rel = src_pose.inverse_matrix() @ dst_pose.matrix

    fx, fy = k[0, 0], k[1, 1]
    cx, cy = k[0, 2], k[1, 2]
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")
    # back-project at the hypothesis depth (pixel (col,row) -> camera ray)
    x = (cols - cx) / fx * depth
    y = (rows - cy) / fy * depth
    pts = np.stack([x, y, np.full_like(x, depth), np.ones_like(x)], axis=0)
    cam = rel @ pts.reshape(4, -1)
    z = cam[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * cam[0] / z + cx
        v = fy * cam[1] / z + cy
    behind = z <= 1e-9
    u = np.where(behind, _FAR_OUT, u)
    v = np.where(behind, _FAR_OUT, v)
    return Grid.from_array(np.stack([v.reshape(h, w), u.reshape(h, w)], axis=-1))
