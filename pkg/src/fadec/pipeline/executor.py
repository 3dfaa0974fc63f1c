"""Frame-by-frame execution of the pipeline graph.

One walk drives both modes.  In float mode every node runs in float64
with exact activations; that is the oracle the quantized mode is judged
against.  In quantized mode the hardware-side operators run in integers
under the exponent plan, while software-side work (cost-volume fusion,
layer norm, bilinear upsampling, grid sampling) runs in float on
dequantized values, mirroring the PL/CPU split: only the feature and the
cost volume cross the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
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
from ..ops import (
    concat,
    conv2d_float,
    conv2d_quant,
    elu_exact,
    eltwise,
    grid_sample,
    layer_norm,
    lut_apply,
    relu,
    sigmoid_exact,
    slice_axis,
    upsample_bilinear,
    upsample_nearest,
)
from ..quantize import dequantize_tensor, quantize_tensor
from ..tensor import FTensor, QTensor
from .convlstm import LSTMState
from .geometry import Pose, build_warp_grid, check_intrinsics, scale_intrinsics
from .keyframe import KeyframeBuffer, KeyframeEntry
from .model import Model
from .quant_plan import FLOAT_PROCESSES, QuantPlan


@dataclass(frozen=True)
class Frame:
    """One scene frame: image, camera-to-global pose, intrinsics."""

    image: FTensor
    pose: Pose
    intrinsics: np.ndarray

    def __post_init__(self):
        if len(self.image.shape) != 3 or self.image.shape[0] != 3:
            raise ShapeError(f"frame image must be (3, H, W), got {self.image.shape}")
        object.__setattr__(self, "intrinsics", check_intrinsics(self.intrinsics))


@dataclass
class FrameResult:
    depth: FTensor
    kb: KeyframeBuffer
    state: LSTMState
    meta: dict = field(default_factory=dict)


def _as_float(value) -> FTensor:
    return dequantize_tensor(value) if isinstance(value, QTensor) else value


class _Runtime:
    def __init__(self, model: Model, mode: str, plan: QuantPlan | None,
                 trace: list | None, capture, node_hook=None):
        if mode not in ("float", "quant"):
            raise ConfigError(f"unknown mode {mode!r}")
        if mode == "quant" and plan is None:
            raise ConfigError("quantized execution requires an exponent plan")
        self.model = model
        self.mode = mode
        self.plan = plan
        self.trace = trace
        self.capture = capture if mode == "float" else None
        self.node_hook = node_hook if mode == "float" else None
        self.env: dict[str, object] = {}

    def note(self, site: str, value) -> None:
        if self.capture is not None:
            self.capture(site, _as_float(value))

    def run(self, nodes) -> None:
        for node in nodes:
            as_float = self.mode == "float" or node.process in FLOAT_PROCESSES
            value = self._run_float(node) if as_float else self._run_quant(node)
            if self.node_hook is not None:
                value = self.node_hook(node, value)
            self.env[node.id] = value
            if self.trace is not None:
                self.trace.append((node.process, node.kind))
            self.note(node.id, value)

    # -- float ---------------------------------------------------------

    def _run_float(self, node):
        env, p = self.env, self.model.params
        x = env[node.inputs[0]]
        if node.kind == KIND_CONV:
            return conv2d_float(x, node.spec, p[f"{node.id}.w"],
                                p[f"{node.id}.b"], p[f"{node.id}.s"])
        if node.kind == KIND_RELU:
            return relu(x)
        if node.kind == KIND_SIGMOID:
            return FTensor(x.shape, sigmoid_exact(x.array))
        if node.kind == KIND_ELU:
            return FTensor(x.shape, elu_exact(x.array))
        if node.kind == KIND_ADD:
            if node.attrs.get("variant") == "reduce_channels":
                c = x.shape[0]
                return FTensor(node.out_shape, x.array.sum(axis=0, keepdims=True) / c)
            b = env[node.inputs[1]]
            return FTensor(x.shape, x.array + b.array)
        if node.kind == KIND_MUL:
            b = env[node.inputs[1]]
            return FTensor(x.shape, x.array * b.array)
        if node.kind == KIND_CONCAT:
            return concat([env[i] for i in node.inputs], axis=0)
        if node.kind == KIND_SLICE:
            a = node.attrs
            return slice_axis(x, a["axis"], a["start"], a["stop"])
        if node.kind == KIND_LAYER_NORM:
            return layer_norm(x, p[f"{node.id}.gamma"], p[f"{node.id}.beta"],
                              self.model.config.ln_eps)
        if node.kind == KIND_UPSAMPLE_NEAREST:
            return upsample_nearest(x, node.attrs["factor"])
        if node.kind == KIND_UPSAMPLE_BILINEAR:
            return upsample_bilinear(_as_float(x), node.attrs["factor"])
        if node.kind == KIND_GRID_SAMPLING:
            return grid_sample(_as_float(x), env[node.inputs[1]])
        raise ConfigError(f"no float handler for kind {node.kind}")

    # -- quantized -----------------------------------------------------

    def _requant_boundary(self, node, value: FTensor) -> QTensor:
        return quantize_tensor(value, self.plan.value_exps[node.id], self.plan.qp.act_bits)

    def _run_quant(self, node):
        env, plan = self.env, self.plan
        p = self.model.params
        x = env[node.inputs[0]]
        act_bits = plan.qp.act_bits
        if node.kind == KIND_CONV:
            cq = plan.convs[node.id]
            if cq.b.exp != cq.w.exp + x.exp:
                raise ConfigError(
                    f"{node.id}: input exponent {x.exp} violates the plan")
            return conv2d_quant(x, node.spec, cq.w, cq.b, cq.s, cq.shift,
                                act_bits=act_bits)
        if node.kind == KIND_RELU:
            return relu(x)
        if node.kind in (KIND_SIGMOID, KIND_ELU):
            return lut_apply(plan.luts[node.id], x)
        if node.kind == KIND_ADD:
            b = env[node.inputs[1]]
            return eltwise("add", x, b, out_exp=plan.value_exps[node.id],
                           act_bits=act_bits)
        if node.kind == KIND_MUL:
            b = env[node.inputs[1]]
            return eltwise("mul", x, b, out_exp=plan.value_exps[node.id],
                           act_bits=act_bits)
        if node.kind == KIND_CONCAT:
            return concat([env[i] for i in node.inputs], axis=0,
                          out_exp=plan.value_exps[node.id], act_bits=act_bits)
        if node.kind == KIND_SLICE:
            a = node.attrs
            return slice_axis(x, a["axis"], a["start"], a["stop"])
        if node.kind == KIND_UPSAMPLE_NEAREST:
            return upsample_nearest(x, node.attrs["factor"])
        # software-side float work behind a dequantize/requantize boundary
        if node.kind == KIND_LAYER_NORM:
            out = layer_norm(_as_float(x), p[f"{node.id}.gamma"],
                             p[f"{node.id}.beta"], self.model.config.ln_eps)
            return self._requant_boundary(node, out)
        if node.kind == KIND_UPSAMPLE_BILINEAR:
            out = upsample_bilinear(_as_float(x), node.attrs["factor"])
            return self._requant_boundary(node, out)
        if node.kind == KIND_GRID_SAMPLING:
            out = grid_sample(_as_float(x), env[node.inputs[1]])
            return self._requant_boundary(node, out)
        raise ConfigError(f"no quantized handler for kind {node.kind}")


def _zero_state(model: Model, mode: str, plan: QuantPlan | None) -> LSTMState:
    shape = model.graph.externals["cl.c_in"]
    if mode == "float":
        return LSTMState.zeros(shape)
    bits = plan.qp.act_bits
    zeros = np.zeros(shape, dtype=np.int64)
    return LSTMState(
        cell=QTensor(shape, zeros, bits=bits, exp=plan.value_exps["cl.ln_c"]),
        hidden=QTensor(shape, zeros, bits=bits, exp=plan.value_exps["cl.h_new"]),
    )


def forward_frame(
    model: Model,
    frame: Frame,
    kb: KeyframeBuffer | None = None,
    state: LSTMState | None = None,
    prev_depth: FTensor | None = None,
    *,
    mode: str = "float",
    plan: QuantPlan | None = None,
    trace: list | None = None,
    capture=None,
    node_hook=None,
) -> FrameResult:
    """Process one frame and return (depth map, new buffer, new state).

    Exactly four values cross frame boundaries: the pose (inside the
    keyframe buffer), the cell state, the hidden state, and the previous
    depth map.  ``node_hook`` (float mode only) may transform each node
    output before downstream nodes consume it; the model generator uses
    it to rescale parameters in place.
    """
    config = model.config
    graph = model.graph
    if frame.image.shape != (3, config.height, config.width):
        raise ShapeError(
            f"frame image {frame.image.shape} does not match configured "
            f"{(3, config.height, config.width)}"
        )
    if kb is None:
        kb = KeyframeBuffer(config.kb_capacity)
    first_frame = state is None
    if state is None:
        state = _zero_state(model, mode, plan)

    rt = _Runtime(model, mode, plan, trace, capture, node_hook)
    nodes = graph.nodes
    cvf_lo = next(i for i, n in enumerate(nodes) if n.process == "CVF")
    cvf_hi = max(i for i, n in enumerate(nodes) if n.process == "CVF") + 1

    # feature extraction and shrinking
    if mode == "quant":
        image_q = quantize_tensor(frame.image, plan.value_exps["image"], plan.qp.act_bits)
        rt.env["image"] = image_q
    else:
        rt.env["image"] = frame.image
    rt.note("image", frame.image)
    rt.run(nodes[:cvf_lo])
    p0 = rt.env[graph.outputs["fs_feature"]]
    p0_float = _as_float(p0)

    # keyframe retrieval happens against the buffer as it was before this
    # frame; the fresh feature is stored afterwards for future frames
    prev_entry = kb.entries[-1] if kb.entries else None
    selected = kb.select_n(frame.pose, config.measurement_frames)
    used = len(selected)
    while len(selected) < config.measurement_frames:
        selected.append(KeyframeEntry(frame.pose, p0_float))
    new_kb = kb.store(frame.pose, p0_float)

    # plane-sweep fusion (software side, float)
    hyps = config.hypotheses()
    fh, fw = p0_float.shape[1], p0_float.shape[2]
    k_feat = scale_intrinsics(frame.intrinsics, fh / config.height)
    rt.env["cvf.current"] = p0_float
    for j, entry in enumerate(selected):
        rt.env[f"cvf.src{j}"] = entry.feature
        for d, depth_h in enumerate(hyps.values):
            rt.env[f"cvf.grid{j}.h{d}"] = build_warp_grid(
                entry.pose, frame.pose, k_feat, depth_h, (fh, fw))
    rt.run(nodes[cvf_lo:cvf_hi])
    volume = FTensor(
        (config.hyp_count, fh, fw),
        np.concatenate([rt.env[f"cvf.red.h{d}"].array
                        for d in range(config.hyp_count)], axis=0))
    rt.note("cvf.volume", volume)
    if mode == "quant":
        rt.env["cvf.volume"] = quantize_tensor(
            volume, plan.value_exps["cvf.volume"], plan.qp.act_bits)
    else:
        rt.env["cvf.volume"] = volume

    # recurrent state: correct the previous hidden state to the current
    # viewpoint using the previous pose and a planar proxy of the previous
    # depth estimate
    bh, bw = graph.externals["hw.grid"][0], graph.externals["hw.grid"][1]
    rt.env["cl.c_in"] = state.cell
    rt.env["hw.hidden_prev"] = state.hidden
    if prev_entry is None:
        src_pose = frame.pose  # no motion: identity grid
        plane = hyps.values[hyps.count // 2]
    else:
        src_pose = prev_entry.pose
        plane = (float(np.mean(prev_depth.array)) if prev_depth is not None
                 else hyps.values[hyps.count // 2])
    rt.env["hw.grid"] = build_warp_grid(
        src_pose, frame.pose, scale_intrinsics(frame.intrinsics, bh / config.height),
        plane, (bh, bw))

    # encoder, recurrent cell, decoder
    rt.run(nodes[cvf_hi:])

    logits = _as_float(rt.env[graph.outputs["depth_logits"]]).array[0]
    inv = (1.0 - logits) / config.depth_min + logits / config.depth_max
    depth = FTensor(logits.shape, 1.0 / inv)
    new_state = LSTMState(cell=rt.env[graph.outputs["cell"]],
                          hidden=rt.env[graph.outputs["hidden"]])
    meta = {
        "fusion": "self" if used == 0 else "keyframes",
        "keyframes_used": used,
        "first_frame": first_frame,
    }
    return FrameResult(depth=depth, kb=new_kb, state=new_state, meta=meta)


def run_scene(
    model: Model,
    frames: list[Frame],
    *,
    mode: str = "float",
    plan: QuantPlan | None = None,
    capture=None,
) -> tuple[list[FTensor], list[dict]]:
    """Run a frame sequence, carrying buffer and state; returns depths and
    per-frame metadata."""
    kb, state, prev_depth = None, None, None
    depths, metas = [], []
    for frame in frames:
        res = forward_frame(model, frame, kb, state, prev_depth,
                            mode=mode, plan=plan, capture=capture)
        kb, state, prev_depth = res.kb, res.state, res.depth
        depths.append(res.depth)
        metas.append(res.meta)
    return depths, metas
