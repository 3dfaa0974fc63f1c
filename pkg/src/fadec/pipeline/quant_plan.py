"""Exponent plan: calibration results turned into a runnable integer plan.

Calibration collects, per value site, a histogram of the largest exponent
at which each sampled element still fits the activation bit width.  The
plan builder turns those histograms into per-site exponents, walks the
graph once to cap them wherever a non-negative requantization shift is
required, quantizes the parameters, and builds the per-site activation
tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, ParseError
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
)
from ..ops.activation import ActLut, lut_build
from ..ops.conv import check_accumulator_width
from ..quantize import (
    QuantParams,
    exponent_from_histogram,
    exponent_histogram,
    max_fitting_exponents,
    param_exponent,
    quantize_tensor,
)
from ..tensor import FTensor, QTensor
from .model import Model

# sites in these processes run in float on the software side
FLOAT_PROCESSES = frozenset({"CVF"})

# boundary sites: values crossing back from software are re-quantized
# directly from float, so their exponent has no upstream shift constraint
_BOUNDARY_KINDS = frozenset({KIND_LAYER_NORM, KIND_UPSAMPLE_BILINEAR, KIND_GRID_SAMPLING})

_PASSTHROUGH_KINDS = frozenset({KIND_RELU, KIND_SLICE, KIND_UPSAMPLE_NEAREST})


class CalibrationCapture:
    """Accumulates per-site exponent histograms across calibration runs."""

    def __init__(self, act_bits: int):
        self.act_bits = act_bits
        self.hists: dict[str, np.ndarray] = {}

    def __call__(self, site: str, value: FTensor) -> None:
        hist = exponent_histogram(value.array, self.act_bits)
        if site in self.hists:
            self.hists[site] += hist
        else:
            self.hists[site] = hist


@dataclass
class ConvQuant:
    w: QTensor
    b: QTensor  # aligned to exp(w) + exp(input)
    s: QTensor
    out_exp: int
    shift: int


@dataclass
class QuantPlan:
    """Validated exponents plus derived integer parameters and tables."""

    qp: QuantParams
    act_exps: dict[str, int]
    param_exps: dict[str, int]
    value_exps: dict[str, int] = field(default_factory=dict)
    convs: dict[str, ConvQuant] = field(default_factory=dict)
    luts: dict[str, ActLut] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "bits": {
                "weight": self.qp.weight_bits,
                "bias": self.qp.bias_bits,
                "scale": self.qp.scale_bits,
                "act": self.qp.act_bits,
            },
            "clip_rate": self.qp.clip_rate,
            "act_exps": dict(sorted(self.act_exps.items())),
            "param_exps": dict(sorted(self.param_exps.items())),
        }


def plan_to_file(plan: QuantPlan, path) -> None:
    with open(path, "w") as f:
        json.dump(plan.to_json(), f, indent=1, sort_keys=True)


def plan_from_file(model: Model, path) -> QuantPlan:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e}") from e
    try:
        bits = obj["bits"]
        qp = QuantParams(
            weight_bits=bits["weight"],
            bias_bits=bits["bias"],
            scale_bits=bits["scale"],
            act_bits=bits["act"],
            clip_rate=obj.get("clip_rate", 0.95),
        )
        act_exps = {k: int(v) for k, v in obj["act_exps"].items()}
    except KeyError as e:
        raise ParseError(f"{path}: missing field {e}") from e
    return build_plan(model, act_exps, qp)


def exponents_from_histograms(
    hists: dict[str, np.ndarray], clip_rate: float, default: int = 0
) -> tuple[dict[str, int], list[str]]:
    """Raw per-site exponents; all-zero sites get the default and a warning."""
    exps, degenerate = {}, []
    for site, hist in sorted(hists.items()):
        total = int(hist.sum())
        nonzero = int(hist[:-1].sum())  # top bin holds exact zeros
        if total == 0 or nonzero == 0:
            exps[site] = default
            degenerate.append(site)
        else:
            exps[site] = exponent_from_histogram(hist, clip_rate, default=default)
    warnings = (
        [f"degenerate all-zero calibration site(s), default exponent used: "
         f"{', '.join(degenerate)}"] if degenerate else []
    )
    return exps, warnings


def build_plan(model: Model, act_exps: dict[str, int], qp: QuantParams) -> QuantPlan:
    """Walk the graph, cap site exponents so every requantization shift is
    non-negative, and derive the integer parameters and tables."""
    graph = model.graph
    plan = QuantPlan(qp=qp, act_exps={}, param_exps={})

    def raw(site: str) -> int:
        if site not in act_exps:
            raise ConfigError(f"quantization manifest is missing site {site!r}")
        return act_exps[site]

    def assign(site: str, exp: int, cap: int | None = None) -> int:
        if cap is not None and exp > cap:
            plan.warnings.append(f"{site}: exponent {exp} capped to {cap}")
            exp = cap
        plan.act_exps[site] = exp
        plan.value_exps[site] = exp
        return exp

    exp_of = plan.value_exps
    assign("image", raw("image"))
    assign("cvf.volume", raw("cvf.volume"))
    # the carried cell crosses a layer-norm boundary, so its exponent is
    # known before the walk reaches the nodes that consume it
    exp_of["cl.c_in"] = raw("cl.ln_c")

    for node in graph.nodes:
        if node.process in FLOAT_PROCESSES:
            continue
        nid = node.id
        if node.kind == KIND_CONV:
            w = model.params[f"{nid}.w"]
            s = model.params[f"{nid}.s"]
            ew = param_exponent(w, qp.weight_bits)
            es = param_exponent(s, qp.scale_bits)
            ein = exp_of[node.inputs[0]]
            ey = assign(nid, raw(nid), cap=ew + ein + es)
            check_accumulator_width(node.spec, qp.weight_bits, qp.act_bits,
                                    qp.bias_bits, qp.scale_bits)
            plan.param_exps[f"{nid}.w"] = ew
            plan.param_exps[f"{nid}.s"] = es
            plan.param_exps[f"{nid}.b"] = ew + ein
            plan.convs[nid] = ConvQuant(
                w=quantize_tensor(w, ew, qp.weight_bits),
                b=quantize_tensor(model.params[f"{nid}.b"], ew + ein, qp.bias_bits),
                s=quantize_tensor(s, es, qp.scale_bits),
                out_exp=ey,
                shift=ew + ein + es - ey,
            )
        elif node.kind in _PASSTHROUGH_KINDS:
            exp_of[nid] = exp_of[node.inputs[0]]
        elif node.kind == KIND_ADD:
            aligned = max(exp_of[i] for i in node.inputs)
            assign(nid, raw(nid), cap=aligned)
        elif node.kind == KIND_MUL:
            assign(nid, raw(nid), cap=sum(exp_of[i] for i in node.inputs))
        elif node.kind == KIND_CONCAT:
            aligned = max(exp_of[i] for i in node.inputs)
            assign(nid, raw(nid), cap=aligned)
        elif node.kind in (KIND_SIGMOID, KIND_ELU):
            cfg = model.config
            ein = exp_of[node.inputs[0]]
            lut = lut_build(node.kind, cfg.lut_entries, cfg.lut_range,
                            half=(node.kind == KIND_SIGMOID),
                            in_exp=ein, out_exp=0)
            # the output exponent must keep the table's own values (and,
            # for the ELU identity branch, the input range) representable
            vals = np.abs(lut.entries)
            if lut.half:
                vals = np.maximum(vals, np.abs(1.0 - lut.entries))
            cap = int(max_fitting_exponents(
                np.array([float(vals.max())]), qp.act_bits)[0])
            if node.kind == KIND_ELU:
                cap = min(cap, ein)
            ey = assign(nid, raw(nid), cap=cap)
            plan.luts[nid] = replace(lut, out_exp=ey)
        elif node.kind in _BOUNDARY_KINDS:
            assign(nid, raw(nid))
        else:
            raise ConfigError(f"no quantization rule for kind {node.kind}")
    return plan
