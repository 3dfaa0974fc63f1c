"""Operator-instance graph shared by the pipeline executor and the
workload analyzer.

A node is one operator instance: its kind (one of the 16 rows of the
operator census), the process it belongs to, resolved input/output
shapes, and the attributes the executor needs to run it.  Edges are
implied by input references that name other nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import AnalysisError, ParseError
from .ops.conv import ConvSpec

KIND_CONV = "conv"
KIND_RELU = "relu"
KIND_SIGMOID = "sigmoid"
KIND_ELU = "elu"
KIND_ADD = "add"
KIND_MUL = "mul"
KIND_CONCAT = "concat"
KIND_SLICE = "slice"
KIND_LAYER_NORM = "layer_norm"
KIND_UPSAMPLE_NEAREST = "upsample_nearest"
KIND_UPSAMPLE_BILINEAR = "upsample_bilinear"
KIND_GRID_SAMPLING = "grid_sampling"

OP_KINDS = frozenset({
    KIND_CONV, KIND_RELU, KIND_SIGMOID, KIND_ELU, KIND_ADD, KIND_MUL,
    KIND_CONCAT, KIND_SLICE, KIND_LAYER_NORM, KIND_UPSAMPLE_NEAREST,
    KIND_UPSAMPLE_BILINEAR, KIND_GRID_SAMPLING,
})

PROCESSES = ("FE", "FS", "CVF", "CVE", "CL", "CVD")
PROCESS_OTHER = "other"

# the 16 census rows, in table order
TABLE_ROWS = (
    "conv(1,1)", "conv(3,1)", "conv(3,2)", "conv(5,1)", "conv(5,2)",
    "relu", "sigmoid", "elu", "add", "mul", "concat", "slice",
    "layer_norm", "upsample_nearest", "upsample_bilinear", "grid_sampling",
)


@dataclass(frozen=True)
class OpDescriptor:
    """One operator instance with shapes, kind, and process label."""

    id: str
    kind: str
    process: str
    inputs: tuple[str, ...]
    in_shapes: tuple[tuple[int, ...], ...]
    out_shape: tuple[int, ...]
    spec: ConvSpec | None = None
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise AnalysisError(f"unknown operator kind {self.kind!r}")
        if self.process not in PROCESSES and self.process != PROCESS_OTHER:
            raise AnalysisError(f"node {self.id} has no valid process label")
        if (self.kind == KIND_CONV) != (self.spec is not None):
            raise AnalysisError(
                f"node {self.id}: conv nodes carry a ConvSpec, others must not"
            )

    @property
    def table_row(self) -> str:
        if self.kind == KIND_CONV:
            return self.spec.label()
        return self.kind


@dataclass
class OpGraph:
    """An ordered list of operator instances (topological by construction)."""

    nodes: list[OpDescriptor]

    def __post_init__(self):
        seen = set()
        for n in self.nodes:
            if n.id in seen:
                raise AnalysisError(f"duplicate node id {n.id}")
            seen.add(n.id)
        self._ids = seen

    def __len__(self):
        return len(self.nodes)

    def edges(self) -> list[tuple[str, str]]:
        """(producer, consumer) pairs for inputs that name other nodes."""
        out = []
        for n in self.nodes:
            for ref in n.inputs:
                if ref in self._ids:
                    out.append((ref, n.id))
        return out


# ---------------------------------------------------------------------------
# JSON interchange


def graph_to_json(graph: OpGraph) -> dict:
    nodes = []
    for n in graph.nodes:
        item = {
            "id": n.id,
            "kind": n.kind,
            "process": n.process,
            "in_shapes": [list(s) for s in n.in_shapes],
            "out_shape": list(n.out_shape),
        }
        if n.spec is not None:
            item["spec"] = {
                "kernel": n.spec.kernel,
                "stride": n.spec.stride,
                "in_ch": n.spec.in_ch,
                "out_ch": n.spec.out_ch,
                "padding": n.spec.padding,
            }
        nodes.append(item)
    return {
        "nodes": nodes,
        "edges": [{"from": a, "to": b} for a, b in graph.edges()],
    }


def graph_from_json(obj: dict) -> OpGraph:
    try:
        raw_nodes = obj["nodes"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"graph JSON missing 'nodes': {e}") from e
    inputs_by_node: dict[str, list[str]] = {}
    for edge in obj.get("edges", []):
        inputs_by_node.setdefault(edge["to"], []).append(edge["from"])
    nodes = []
    for item in raw_nodes:
        try:
            node_id = item["id"]
            kind = item["kind"]
        except (KeyError, TypeError) as e:
            raise ParseError(f"graph node missing field: {e}") from e
        process = item.get("process")
        if not process:
            raise AnalysisError(f"node {node_id} is unlabeled (no process)")
        spec = None
        if "spec" in item and item["spec"] is not None:
            s = item["spec"]
            spec = ConvSpec(s["kernel"], s["stride"], s["in_ch"], s["out_ch"],
                            s.get("padding", -1))
        nodes.append(OpDescriptor(
            id=node_id,
            kind=kind,
            process=process,
            inputs=tuple(inputs_by_node.get(node_id, ())),
            in_shapes=tuple(tuple(sh) for sh in item.get("in_shapes", ())),
            out_shape=tuple(item.get("out_shape", ())),
            spec=spec,
        ))
    return OpGraph(nodes)


def save_graph(path, graph: OpGraph) -> None:
    with open(path, "w") as f:
        json.dump(graph_to_json(graph), f, indent=1, sort_keys=True)


def load_graph(path) -> OpGraph:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e}") from e
    return graph_from_json(obj)
