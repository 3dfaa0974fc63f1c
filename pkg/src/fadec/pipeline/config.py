"""Desk-scale pipeline configuration.

The operator structure (block layout, channel plan) is fixed so that the
per-process operator census is stable; the knobs here trade fidelity for
speed (hypothesis count, measurement frames) or change the working
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

# five stride-2 stages sit between the input and the coarsest feature map
RESOLUTION_DIVISOR = 32


@dataclass(frozen=True)
class DepthHypotheses:
    """Strictly increasing candidate depths for the plane sweep."""

    count: int
    values: tuple[float, ...]

    def __post_init__(self):
        if self.count <= 0 or len(self.values) != self.count:
            raise ConfigError("hypothesis count must match the value list")
        vals = self.values
        if any(v <= 0 for v in vals):
            raise ConfigError("hypothesis depths must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("hypothesis depths must be strictly increasing")

    @classmethod
    def inverse_uniform(cls, count: int, d_min: float, d_max: float) -> "DepthHypotheses":
        """Uniform in inverse depth from d_min to d_max, increasing."""
        inv = np.linspace(1.0 / d_min, 1.0 / d_max, count)
        return cls(count, tuple(float(v) for v in 1.0 / inv))


@dataclass(frozen=True)
class PipelineConfig:
    height: int = 96
    width: int = 64
    hyp_count: int = 64
    measurement_frames: int = 1  # the census-reference setup uses 2
    kb_capacity: int = 8
    depth_min: float = 0.5
    depth_max: float = 8.0
    lut_entries: int = 256
    lut_range: float = 8.0
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.height % RESOLUTION_DIVISOR or self.width % RESOLUTION_DIVISOR:
            raise ConfigError(
                f"height and width must be multiples of {RESOLUTION_DIVISOR}"
            )
        if self.hyp_count < 2:
            raise ConfigError("need at least 2 depth hypotheses")
        if self.measurement_frames not in (1, 2):
            raise ConfigError("measurement_frames must be 1 or 2")
        if not (0 < self.depth_min < self.depth_max):
            raise ConfigError("depth range must satisfy 0 < min < max")

    @classmethod
    def reference(cls) -> "PipelineConfig":
        """The configuration whose instantiated graph matches the
        documented operator census (two measurement frames, 64 hypotheses)."""
        return cls(hyp_count=64, measurement_frames=2)

    def hypotheses(self) -> DepthHypotheses:
        return DepthHypotheses.inverse_uniform(self.hyp_count, self.depth_min, self.depth_max)

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "hyp_count": self.hyp_count,
            "measurement_frames": self.measurement_frames,
            "kb_capacity": self.kb_capacity,
            "depth_min": self.depth_min,
            "depth_max": self.depth_max,
            "lut_entries": self.lut_entries,
            "lut_range": self.lut_range,
            "ln_eps": self.ln_eps,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})
