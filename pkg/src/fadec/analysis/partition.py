"""Rule-based HW/SW partitioning of an operator graph.

Convolutions, LUT activations, elementwise arithmetic, concatenation,
slicing, and nearest upsampling go to hardware.  Layer norm (square root
and division at high precision), bilinear upsampling (float precision),
and grid sampling (irregular access) go to software.  The cost-volume
fusion process is split at the feature boundary: its elementwise work
stays in software next to the grid sampling, so only the current feature
and the finished cost volume cross between the two sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..graph import (
    KIND_ADD,
    KIND_CONCAT,
    KIND_CONV,
    KIND_ELU,
    KIND_GRID_SAMPLING,
    KIND_LAYER_NORM,
    KIND_MUL,
    KIND_RELU,
    KIND_SIGMOID,
    KIND_SLICE,
    KIND_UPSAMPLE_BILINEAR,
    KIND_UPSAMPLE_NEAREST,
    OpDescriptor,
    OpGraph,
    PROCESS_OTHER,
)

HW = "HW"
SW = "SW"

REASON_COMPUTE = "compute-bound"
REASON_BANDWIDTH = "bandwidth-bound"
REASON_IRREGULAR = "irregular-access"
REASON_PRECISION = "precision-critical"
REASON_LOW_COUNT = "low-count"

_HW_RULES = {
    KIND_CONV: REASON_COMPUTE,
    KIND_RELU: REASON_COMPUTE,
    KIND_SIGMOID: REASON_COMPUTE,
    KIND_ELU: REASON_COMPUTE,
    KIND_ADD: REASON_BANDWIDTH,
    KIND_MUL: REASON_BANDWIDTH,
    KIND_CONCAT: REASON_BANDWIDTH,
    KIND_SLICE: REASON_BANDWIDTH,
    KIND_UPSAMPLE_NEAREST: REASON_BANDWIDTH,
}

_SW_RULES = {
    KIND_LAYER_NORM: REASON_PRECISION,
    KIND_UPSAMPLE_BILINEAR: REASON_PRECISION,
    KIND_GRID_SAMPLING: REASON_IRREGULAR,
}


@dataclass
class Placement:
    side: str
    reason: str


@dataclass
class PartitionPlan:
    """Per-node placement plus the derived summary and boundary census."""

    placements: dict[str, Placement]
    summary: dict[str, dict[str, dict[str, str]]] = field(default_factory=dict)
    boundary_crossings: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "placements": {nid: {"side": p.side, "reason": p.reason}
                           for nid, p in sorted(self.placements.items())},
            "summary": {proc: {row: dict(v) for row, v in sorted(rows.items())}
                        for proc, rows in sorted(self.summary.items())},
            "boundary_crossings": dict(sorted(self.boundary_crossings.items())),
        }


def place_node(node: OpDescriptor) -> Placement:
    """Placement of one operator instance under the partitioning rules."""
    if node.kind in _SW_RULES:
        return Placement(SW, _SW_RULES[node.kind])
    if node.process == "CVF":
        # split at the feature boundary: fusion arithmetic stays with the
        # software-side grid sampling
        return Placement(SW, REASON_BANDWIDTH)
    if node.process == PROCESS_OTHER:
        return Placement(SW, REASON_LOW_COUNT)
    return Placement(HW, _HW_RULES[node.kind])


def partition_hw_sw(graph: OpGraph) -> PartitionPlan:
    """Place every node exactly once; pure function of (kind, process)."""
    placements = {n.id: place_node(n) for n in graph.nodes}
    summary: dict[str, dict[str, dict[str, str]]] = {}
    for n in graph.nodes:
        p = placements[n.id]
        summary.setdefault(n.process, {})[n.table_row] = {
            "side": p.side, "reason": p.reason,
        }
    crossings: dict[str, int] = {}
    for src, dst in graph.edges():
        if placements[src].side != placements[dst].side:
            key = f"{placements[src].side}->{placements[dst].side}"
            crossings[key] = crossings.get(key, 0) + 1
    return PartitionPlan(placements=placements, summary=summary,
                         boundary_crossings=crossings)
