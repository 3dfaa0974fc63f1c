"""Pose-indexed store of past image features.

The buffer keeps the feature-shrinker output of recent frames together
with the camera pose it was observed from; a stored feature is retrieved
when a frame with a similar pose appears.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ShapeError
from ..tensor import FTensor
from .geometry import Pose, pose_distance

DEFAULT_ROTATION_WEIGHT = 1.0
DEFAULT_DISTANCE_THRESHOLD = 0.35


@dataclass(frozen=True)
class KeyframeEntry:
    pose: Pose
    feature: FTensor


@dataclass(frozen=True)
class KeyframeBuffer:
    """FIFO buffer of (pose, feature) entries, ordered by insertion time."""

    capacity: int
    entries: tuple[KeyframeEntry, ...] = ()
    rotation_weight: float = DEFAULT_ROTATION_WEIGHT
    threshold: float = DEFAULT_DISTANCE_THRESHOLD

    def __post_init__(self):
        if self.capacity <= 0:
            raise ShapeError("keyframe buffer capacity must be positive")
        if len(self.entries) > self.capacity:
            raise ShapeError("keyframe buffer over capacity")

    def __len__(self):
        return len(self.entries)

    def store(self, pose: Pose, feature: FTensor) -> "KeyframeBuffer":
        """Append an entry, evicting the oldest when full."""
        if self.entries and feature.shape != self.entries[0].feature.shape:
            raise ShapeError(
                f"feature shape {feature.shape} does not match buffered "
                f"{self.entries[0].feature.shape}"
            )
        entries = self.entries + (KeyframeEntry(pose, feature),)
        if len(entries) > self.capacity:
            entries = entries[-self.capacity :]
        return KeyframeBuffer(self.capacity, entries,
                              self.rotation_weight, self.threshold)

    def select(self, current: Pose) -> KeyframeEntry | None:
        """Entry minimizing the pose distance, or None when the buffer is
        empty or every entry exceeds the threshold.  Ties prefer the most
        recently stored entry."""
        best = None
        best_d = None
        for entry in self.entries:  # later entries win ties
            d = pose_distance(entry.pose, current, self.rotation_weight)
            if best_d is None or d <= best_d:
                best, best_d = entry, d
        if best is None or best_d > self.threshold:
            return None
        return best

    def select_n(self, current: Pose, n: int) -> list[KeyframeEntry]:
        """Up to n entries under the threshold, nearest first; ties prefer
        recency."""
        scored = [
            (pose_distance(e.pose, current, self.rotation_weight), -i, e)
            for i, e in enumerate(self.entries)
        ]
        scored = [s for s in scored if s[0] <= self.threshold]
        scored.sort(key=lambda s: (s[0], s[1]))
        return [e for _, _, e in scored[:n]]
