"""Static workload analysis of an operator graph.

Counts operator instances per process, estimates multiplication counts
from the resolved tensor shapes, and reports per-process shares of the
total.  Activation functions count as zero multiplications (they are
table lookups); a grid-sampling output element costs the eight weight
products of its four taps; a bilinear-upsampling output element likewise
costs eight; layer norm touches every element twice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AnalysisError
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
    PROCESSES,
    TABLE_ROWS,
)

GRID_SAMPLE_MULTS_PER_ELEMENT = 8
BILINEAR_MULTS_PER_ELEMENT = 8
LAYER_NORM_MULTS_PER_ELEMENT = 2


@dataclass
class WorkloadReport:
    instance_counts: dict[str, dict[str, int]]
    mult_counts: dict[str, int]
    mult_shares: dict[str, float]
    conv_mult_share_within: float  # conv share of CVE+CVD multiplications

    def to_json(self) -> dict:
        return {
            "instance_counts": {p: dict(sorted(rows.items()))
                                for p, rows in sorted(self.instance_counts.items())},
            "mult_counts": dict(sorted(self.mult_counts.items())),
            "mult_shares": dict(sorted(self.mult_shares.items())),
            "conv_mult_share_within_cve_cvd": self.conv_mult_share_within,
        }


def _elements(shape) -> int:
    return int(np.prod(shape)) if shape else 0


def node_multiplications(node: OpDescriptor) -> int:
    """Multiplication count of one operator instance from its shapes."""
    if not node.out_shape:
        raise AnalysisError(f"node {node.id} has an unresolved output shape")
    out_elems = _elements(node.out_shape)
    if node.kind == KIND_CONV:
        spec = node.spec
        return out_elems * spec.in_ch * spec.kernel * spec.kernel
    if node.kind == KIND_MUL:
        return out_elems
    if node.kind == KIND_GRID_SAMPLING:
        return out_elems * GRID_SAMPLE_MULTS_PER_ELEMENT
    if node.kind == KIND_UPSAMPLE_BILINEAR:
        return out_elems * BILINEAR_MULTS_PER_ELEMENT
    if node.kind == KIND_LAYER_NORM:
        return out_elems * LAYER_NORM_MULTS_PER_ELEMENT
    if node.kind in (KIND_RELU, KIND_SIGMOID, KIND_ELU, KIND_ADD,
                     KIND_CONCAT, KIND_SLICE, KIND_UPSAMPLE_NEAREST):
        return 0
    raise AnalysisError(f"no multiplication rule for kind {node.kind}")


def count_operator_instances(graph: OpGraph) -> dict[str, dict[str, int]]:
    """Exact per-process, per-row instance counts."""
    counts: dict[str, dict[str, int]] = {}
    for node in graph.nodes:
        row = node.table_row
        if row not in TABLE_ROWS:
            raise AnalysisError(f"node {node.id}: unknown operator row {row}")
        counts.setdefault(node.process, {})
        counts[node.process][row] = counts[node.process].get(row, 0) + 1
    return counts


def count_multiplications(graph: OpGraph) -> tuple[dict[str, int], dict[str, float]]:
    """Per-process multiplication counts and shares over the six major
    processes ('other' is counted but excluded from the shares)."""
    mults: dict[str, int] = {}
    for node in graph.nodes:
        mults[node.process] = mults.get(node.process, 0) + node_multiplications(node)
    counted = {p: mults.get(p, 0) for p in PROCESSES}
    total = sum(counted.values())
    shares = {p: (counted[p] / total if total else 0.0) for p in PROCESSES}
    return mults, shares


def analyze_workload(graph: OpGraph) -> WorkloadReport:
    instances = count_operator_instances(graph)
    mults, shares = count_multiplications(graph)
    conv_cve_cvd = sum(node_multiplications(n) for n in graph.nodes
                       if n.process in ("CVE", "CVD") and n.kind == KIND_CONV)
    all_cve_cvd = mults.get("CVE", 0) + mults.get("CVD", 0)
    conv_share = conv_cve_cvd / all_cve_cvd if all_cve_cvd else 0.0
    return WorkloadReport(
        instance_counts=instances,
        mult_counts=mults,
        mult_shares=shares,
        conv_mult_share_within=conv_share,
    )
