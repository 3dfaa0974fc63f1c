"""Reference operator census and the graph that realizes it.

The counts below are the documented per-process operator-instance
expectation for the bundled reference pipeline; `analyze --reference`
exits nonzero when the instantiated graph stops matching them.
"""

from __future__ import annotations

from ..graph import OpGraph
from ..pipeline.config import PipelineConfig
from ..pipeline.network import build_graph

REFERENCE_OPERATOR_COUNTS: dict[str, dict[str, int]] = {
    "FE": {
        "conv(1,1)": 33, "conv(3,1)": 6, "conv(3,2)": 2, "conv(5,1)": 7,
        "conv(5,2)": 3, "relu": 34, "add": 10,
    },
    "FS": {
        "conv(1,1)": 5, "conv(3,1)": 4, "add": 4, "upsample_nearest": 4,
    },
    "CVF": {
        "add": 128, "mul": 64, "grid_sampling": 128,
    },
    "CVE": {
        "conv(3,1)": 9, "conv(3,2)": 3, "conv(5,1)": 3, "conv(5,2)": 1,
        "relu": 16, "concat": 4,
    },
    "CL": {
        "conv(3,1)": 1, "sigmoid": 3, "elu": 2, "add": 1, "mul": 3,
        "concat": 1, "slice": 4, "layer_norm": 2,
    },
    "CVD": {
        "conv(3,1)": 14, "conv(5,1)": 5, "relu": 14, "sigmoid": 5,
        "concat": 5, "layer_norm": 9, "upsample_bilinear": 9,
    },
}


def reference_graph() -> OpGraph:
    """The operator graph of the reference configuration (64 hypotheses,
    two measurement frames)."""
    return build_graph(PipelineConfig.reference()).op_graph()
