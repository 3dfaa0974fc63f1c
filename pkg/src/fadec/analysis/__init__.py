"""Operator-graph workload analysis and HW/SW partitioning."""

from .partition import (
    HW,
    SW,
    PartitionPlan,
    Placement,
    partition_hw_sw,
    place_node,
)
from .patterns import classify_memory_pattern
from .reference import REFERENCE_OPERATOR_COUNTS, reference_graph
from .tables import census_table
from .workload import (
    WorkloadReport,
    analyze_workload,
    count_multiplications,
    count_operator_instances,
    node_multiplications,
)

__all__ = [
    "HW",
    "SW",
    "PartitionPlan",
    "Placement",
    "REFERENCE_OPERATOR_COUNTS",
    "WorkloadReport",
    "analyze_workload",
    "census_table",
    "classify_memory_pattern",
    "count_multiplications",
    "count_operator_instances",
    "node_multiplications",
    "partition_hw_sw",
    "place_node",
    "reference_graph",
]
