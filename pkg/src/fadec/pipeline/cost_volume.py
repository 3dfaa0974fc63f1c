"""Plane-sweep cost-volume fusion.

Each depth-hypothesis slice is the channel-direction dot product between
the current feature and the warped measurement feature for that
hypothesis, normalized by the channel count so the cost magnitude stays
scale-free across channel configurations.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..tensor import FTensor
from .config import DepthHypotheses


def cost_volume_fusion(
    current_feat: FTensor,
    warped_feats: list[FTensor],
    hyps: DepthHypotheses,
) -> FTensor:
    """Cost volume of shape (count, H, W); slice d is
    sum_channels(current * warped_d) / channels."""
    if len(warped_feats) != hyps.count:
        raise ShapeError(
            f"{len(warped_feats)} warped features for {hyps.count} hypotheses"
        )
    c, h, w = current_feat.shape
    cur = current_feat.array
    out = np.empty((hyps.count, h, w), dtype=np.float64)
    for d, wf in enumerate(warped_feats):
        if wf.shape != current_feat.shape:
            raise ShapeError(
                f"warped feature {d} shape {wf.shape} != {current_feat.shape}"
            )
        out[d] = (cur * wf.array).sum(axis=0) / c
    return FTensor(out.shape, out)
