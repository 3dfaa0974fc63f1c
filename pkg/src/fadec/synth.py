"""Synthetic scenes and calibration inputs, plus scene-directory I/O.

A scene directory holds ``frame_NNNN.ftz`` images with JSON sidecars
``frame_NNNN.json`` carrying the pose (16 row-major reals), the
intrinsics (9 reals), and optionally the file name of a ground-truth
depth map.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import ParseError
from .pipeline.config import PipelineConfig
from .pipeline.executor import Frame
from .pipeline.geometry import Pose, default_intrinsics
from .seeding import named_rng
from .tensor import FTensor, load_tensor, save_tensor

__all__ = [
    "calibration_frames",
    "calibration_images",
    "default_intrinsics",
    "load_scene",
    "make_scene",
    "smooth_image",
]


def _small_rotation(rng, max_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.uniform(-max_deg, max_deg))
    k = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def smooth_image(rng, height: int, width: int, mean: float, std: float) -> FTensor:
    """Low-frequency random image with the requested statistics."""
    coarse = rng.normal(size=(3, height // 8, width // 8))
    img = np.repeat(np.repeat(coarse, 8, axis=1), 8, axis=2)
    img = img + 0.25 * rng.normal(size=(3, height, width))
    img = (img - img.mean()) / (img.std() + 1e-9) * std + mean
    return FTensor.from_array(img)


def _sequence(rng, config: PipelineConfig, count: int, mean: float, std: float,
              max_rot_deg: float, max_trans: float) -> list[Frame]:
    """Frames with smooth random images and small rigid camera motion."""
    k = default_intrinsics(config.height, config.width)
    pose = np.eye(4)
    frames = []
    for i in range(count):
        img = smooth_image(rng, config.height, config.width, mean, std)
        if i > 0:
            delta = np.eye(4)
            delta[:3, :3] = _small_rotation(rng, max_rot_deg)
            delta[:3, 3] = rng.uniform(-max_trans, max_trans, size=3)
            pose = pose @ delta
        frames.append(Frame(image=img, pose=Pose(pose.copy()), intrinsics=k))
    return frames


def calibration_frames(seed: int, count: int, config: PipelineConfig,
                       mean: float = 0.0, std: float = 1.0) -> list[Frame]:
    """Calibration sequence: random images with the same mean and variance
    as the target data, moving like the target sequences so fusion and
    warping see realistic ranges.

    Spatially white noise would systematically understate convolution
    output ranges and mis-calibrate the exponents, so the images come
    from the same smooth texture family as the synthetic scenes.
    """
    rng = named_rng(seed, "calibration")
    return _sequence(rng, config, count, mean, std,
                     max_rot_deg=1.0, max_trans=0.04)


def calibration_images(seed: int, count: int, config: PipelineConfig,
                       mean: float = 0.0, std: float = 1.0) -> list[FTensor]:
    """Images of the calibration sequence (for sample-based transport)."""
    return [f.image for f in calibration_frames(seed, count, config, mean, std)]


def make_scene(
    out_dir,
    seed: int,
    n_frames: int,
    config: PipelineConfig,
    *,
    mean: float = 0.0,
    std: float = 1.0,
    plane_depth: float = 2.0,
    max_rot_deg: float = 1.0,
    max_trans: float = 0.04,
) -> str:
    """Write a synthetic scene: smooth random images, small rigid camera
    motion, and a constant-depth ground-truth plane."""
    os.makedirs(out_dir, exist_ok=True)
    rng = named_rng(seed, "scene")
    frames = _sequence(rng, config, n_frames, mean, std, max_rot_deg, max_trans)
    for i, frame in enumerate(frames):
        depth_name = f"depth_{i:04d}.ftz"
        gt = FTensor.from_array(
            np.full((config.height, config.width), plane_depth))
        save_tensor(os.path.join(out_dir, depth_name), gt)
        save_tensor(os.path.join(out_dir, f"frame_{i:04d}.ftz"), frame.image)
        sidecar = {
            "pose": [float(v) for v in frame.pose.matrix.reshape(-1)],
            "intrinsics": [float(v) for v in frame.intrinsics.reshape(-1)],
            "depth": depth_name,
        }
        with open(os.path.join(out_dir, f"frame_{i:04d}.json"), "w") as f:
            json.dump(sidecar, f, indent=1, sort_keys=True)
    return str(out_dir)


def load_scene(scene_dir) -> tuple[list[Frame], list[FTensor | None]]:
    """Read a scene directory in name order; returns frames and per-frame
    ground-truth depth (None where absent)."""
    scene_dir = str(scene_dir)
    names = sorted(f for f in os.listdir(scene_dir)
                   if f.startswith("frame_") and f.endswith(".ftz"))
    if not names:
        raise ParseError(f"{scene_dir}: no frame_*.ftz files found")
    frames, gts = [], []
    for name in names:
        sidecar_path = os.path.join(scene_dir, name[:-4] + ".json")
        try:
            with open(sidecar_path) as f:
                sidecar = json.load(f)
        except FileNotFoundError:
            raise ParseError(f"{sidecar_path}: missing pose sidecar")
        except json.JSONDecodeError as e:
            raise ParseError(f"{sidecar_path}: {e}")
        for key, count in (("pose", 16), ("intrinsics", 9)):
            if key not in sidecar:
                raise ParseError(f"{sidecar_path}: missing field '{key}'")
            if len(sidecar[key]) != count:
                raise ParseError(f"{sidecar_path}: field '{key}' must have "
                                 f"{count} values")
        pose = Pose(np.asarray(sidecar["pose"], dtype=np.float64).reshape(4, 4))
        intr = np.asarray(sidecar["intrinsics"], dtype=np.float64).reshape(3, 3)
        image = load_tensor(os.path.join(scene_dir, name))
        frames.append(Frame(image=image, pose=pose, intrinsics=intr))
        gt = None
        if sidecar.get("depth"):
            gt = load_tensor(os.path.join(scene_dir, sidecar["depth"]))
        gts.append(gt)
    return frames, gts
