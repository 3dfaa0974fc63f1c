"""Structural definition of the depth-estimation network.

One builder enumerates every operator instance of the six processes
(feature extractor FE, feature shrinker FS, cost-volume fusion CVF,
cost-volume encoder CVE, convolutional LSTM CL, cost-volume decoder CVD)
as an ordered node list.  The float and quantized executors both walk
this list, and the workload analyzer consumes it unchanged, so the
executed operators and the analyzed census cannot drift apart.

The block layout and channel plan are fixed; resolution, hypothesis
count, and measurement-frame count come from the configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError
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
)
from ..ops.conv import ConvSpec, conv_output_hw
from .config import PipelineConfig

# feature-extractor inverted-bottleneck blocks:
# (name, kernel, stride, in_ch, expand_ch, out_ch, residual)
FE_BLOCKS = (
    ("b01", 3, 2, 8, 16, 12, False),
    ("b02", 3, 1, 12, 24, 12, True),
    ("b03", 3, 1, 12, 24, 12, True),
    ("b04", 5, 2, 12, 24, 16, False),
    ("b05", 5, 1, 16, 32, 16, True),
    ("b06", 5, 1, 16, 32, 16, True),
    ("b07", 5, 2, 16, 32, 20, False),
    ("b08", 5, 1, 20, 32, 20, True),
    ("b09", 5, 1, 20, 32, 20, True),
    ("b10", 5, 2, 20, 32, 24, False),
    ("b11", 5, 1, 24, 32, 32, False),
    ("b12", 5, 1, 32, 32, 32, True),
    ("b13", 5, 1, 32, 32, 32, True),
    ("b14", 3, 1, 32, 32, 32, True),
    ("b15", 3, 1, 32, 32, 32, True),
    ("b16", 3, 1, 32, 32, 24, False),
)
STEM_CH = 8
FE_TAPS = {"b03": "L1", "b06": "L2", "b09": "L3", "b16": "L4"}

FPN_CH = 16

# cost-volume encoder stages: (name, down_kernel, channels, extra convs)
CVE_STAGES = (
    ("s0", 5, 24, ("conv3",)),
    ("s1", 3, 24, ("conv3", "conv3")),
    ("s2", 3, 32, ("conv3", "conv3")),
    ("s3", 3, 32, ("conv5", "conv5", "conv5")),
)
CVE_BOTTLENECK_CONVS = 4
CVE_CH = 32

CL_HIDDEN_CH = 32

# decoder levels, coarse to fine: (name, channels, convs with layer norm,
# convs without); every level also has a conv(5,1)+sigmoid depth head
CVD_LEVELS = (
    ("l4", 24, 1, 1),
    ("l3", 16, 3, 0),
    ("l2", 12, 3, 0),
    ("l1", 8, 2, 1),
    ("l0", 20, 0, 3),
)


@dataclass
class PipelineGraph:
    config: PipelineConfig
    nodes: list[OpDescriptor]
    externals: dict[str, tuple[int, ...]]
    outputs: dict[str, str]
    skips: dict[str, str] = field(default_factory=dict)

    def op_graph(self) -> OpGraph:
        return OpGraph(self.nodes)

    def conv_nodes(self) -> list[OpDescriptor]:
        return [n for n in self.nodes if n.kind == KIND_CONV]


class _Builder:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.nodes: list[OpDescriptor] = []
        self.shapes: dict[str, tuple[int, ...]] = {}
        self.externals: dict[str, tuple[int, ...]] = {}

    def external(self, name: str, shape: tuple[int, ...]) -> str:
        self.externals[name] = shape
        self.shapes[name] = shape
        return name

    def _emit(self, node_id, kind, process, inputs, out_shape, spec=None, **attrs):
        node = OpDescriptor(
            id=node_id,
            kind=kind,
            process=process,
            inputs=tuple(inputs),
            in_shapes=tuple(self.shapes[i] for i in inputs),
            out_shape=tuple(out_shape),
            spec=spec,
            attrs=attrs,
        )
        self.nodes.append(node)
        self.shapes[node_id] = node.out_shape
        return node_id

    def conv(self, node_id, process, src, kernel, stride, out_ch):
        c, h, w = self.shapes[src]
        spec = ConvSpec(kernel, stride, c, out_ch)
        oh, ow = conv_output_hw(spec, h, w)
        return self._emit(node_id, KIND_CONV, process, [src], (out_ch, oh, ow), spec=spec)

    def relu(self, node_id, process, src):
        return self._emit(node_id, KIND_RELU, process, [src], self.shapes[src])

    def act(self, node_id, kind, process, src):
        return self._emit(node_id, kind, process, [src], self.shapes[src])

    def add(self, node_id, process, a, b):
        if self.shapes[a] != self.shapes[b]:
            raise ConfigError(f"add {node_id}: shape mismatch")
        return self._emit(node_id, KIND_ADD, process, [a, b], self.shapes[a])

    def reduce_channels(self, node_id, process, src):
        c, h, w = self.shapes[src]
        return self._emit(node_id, KIND_ADD, process, [src], (1, h, w),
                          variant="reduce_channels")

    def mul(self, node_id, process, a, b):
        return self._emit(node_id, KIND_MUL, process, [a, b], self.shapes[a])

    def cat(self, node_id, process, srcs):
        shapes = [self.shapes[s] for s in srcs]
        ch = sum(s[0] for s in shapes)
        return self._emit(node_id, KIND_CONCAT, process, srcs, (ch,) + shapes[0][1:])

    def slice_ch(self, node_id, process, src, start, stop):
        c, h, w = self.shapes[src]
        return self._emit(node_id, KIND_SLICE, process, [src], (stop - start, h, w),
                          axis=0, start=start, stop=stop)

    def layer_norm(self, node_id, process, src):
        return self._emit(node_id, KIND_LAYER_NORM, process, [src], self.shapes[src])

    def up_nearest(self, node_id, process, src, factor=2):
        c, h, w = self.shapes[src]
        return self._emit(node_id, KIND_UPSAMPLE_NEAREST, process, [src],
                          (c, h * factor, w * factor), factor=factor)

    def up_bilinear(self, node_id, process, src, factor=2):
        c, h, w = self.shapes[src]
        return self._emit(node_id, KIND_UPSAMPLE_BILINEAR, process, [src],
                          (c, h * factor, w * factor), factor=factor)

    def grid_sample(self, node_id, process, feature, grid):
        c = self.shapes[feature][0]
        gh, gw, _ = self.shapes[grid]
        return self._emit(node_id, KIND_GRID_SAMPLING, process, [feature, grid],
                          (c, gh, gw))


def _build_fe(b: _Builder, image: str) -> dict[str, str]:
    """Inverted-bottleneck feature extractor; returns the pyramid taps."""
    x = b.conv("fe.stem.conv", "FE", image, 3, 2, STEM_CH)
    x = b.relu("fe.stem.relu", "FE", x)
    x = b.conv("fe.sep.dw", "FE", x, 3, 1, STEM_CH)
    x = b.relu("fe.sep.relu", "FE", x)
    x = b.conv("fe.sep.pw", "FE", x, 1, 1, STEM_CH)
    taps = {"L0": x}
    for name, k, s, in_ch, exp_ch, out_ch, residual in FE_BLOCKS:
        if b.shapes[x][0] != in_ch:
            raise ConfigError(f"fe.{name}: channel plan mismatch")
        inp = x
        x = b.conv(f"fe.{name}.expand", "FE", x, 1, 1, exp_ch)
        x = b.relu(f"fe.{name}.expand_relu", "FE", x)
        x = b.conv(f"fe.{name}.mid", "FE", x, k, s, exp_ch)
        x = b.relu(f"fe.{name}.mid_relu", "FE", x)
        x = b.conv(f"fe.{name}.project", "FE", x, 1, 1, out_ch)
        if residual:
            x = b.add(f"fe.{name}.add", "FE", x, inp)
        if name in FE_TAPS:
            taps[FE_TAPS[name]] = x
    return taps


def _build_fs(b: _Builder, taps: dict[str, str]) -> str:
    """Feature pyramid: lateral 1x1 convs, then top-down nearest-upsample,
    add, and 3x3 smoothing.  Returns the finest pyramid feature."""
    levels = ["L0", "L1", "L2", "L3", "L4"]
    lats = [b.conv(f"fs.lat{i}", "FS", taps[lvl], 1, 1, FPN_CH)
            for i, lvl in enumerate(levels)]
    p = lats[4]
    for i in (3, 2, 1, 0):
        up = b.up_nearest(f"fs.up{i}", "FS", p)
        s = b.add(f"fs.add{i}", "FS", lats[i], up)
        p = b.conv(f"fs.p{i}", "FS", s, 3, 1, FPN_CH)
    return p


def _build_cvf(b: _Builder, config: PipelineConfig, fh: int, fw: int) -> None:
    """Plane-sweep fusion: per hypothesis, warp each measurement feature,
    sum the warp sets, multiply by the current feature, and reduce over
    channels.  The stacked slices become the cost volume."""
    m = config.measurement_frames
    cur = b.external("cvf.current", (FPN_CH, fh, fw))
    srcs = [b.external(f"cvf.src{j}", (FPN_CH, fh, fw)) for j in range(m)]
    for d in range(config.hyp_count):
        sampled = []
        for j in range(m):
            grid = b.external(f"cvf.grid{j}.h{d}", (fh, fw, 2))
            sampled.append(
                b.grid_sample(f"cvf.gs{j}.h{d}", "CVF", srcs[j], grid))
        warped = sampled[0]
        if m == 2:
            warped = b.add(f"cvf.pair.h{d}", "CVF", sampled[0], sampled[1])
        prod = b.mul(f"cvf.mul.h{d}", "CVF", cur, warped)
        b.reduce_channels(f"cvf.red.h{d}", "CVF", prod)
    b.external("cvf.volume", (config.hyp_count, fh, fw))


def _build_cve(b: _Builder, taps: dict[str, str], p0: str) -> tuple[str, dict[str, str]]:
    """Cost-volume encoder: four downsampling stages, each concatenating
    the image feature at its resolution, then a bottleneck stack."""
    skip_src = {"s0": p0, "s1": taps["L1"], "s2": taps["L2"], "s3": taps["L3"]}
    x = "cvf.volume"
    skips = {}
    for name, down_k, ch, extra in CVE_STAGES:
        cat = b.cat(f"cve.{name}.cat", "CVE", [x, skip_src[name]])
        x = b.conv(f"cve.{name}.down", "CVE", cat, down_k, 2, ch)
        x = b.relu(f"cve.{name}.down_relu", "CVE", x)
        for i, kind in enumerate(extra):
            k = 3 if kind == "conv3" else 5
            x = b.conv(f"cve.{name}.conv{i}", "CVE", x, k, 1, ch)
            x = b.relu(f"cve.{name}.conv{i}_relu", "CVE", x)
        skips[name] = x
    for i in range(CVE_BOTTLENECK_CONVS):
        x = b.conv(f"cve.bott.conv{i}", "CVE", x, 3, 1, CVE_CH)
        x = b.relu(f"cve.bott.conv{i}_relu", "CVE", x)
    return x, skips


def _build_cl(b: _Builder, cve_out: str, h_in: str) -> tuple[str, str]:
    """ConvLSTM step: concat input and hidden, one 3x3 conv, a four-way
    slice into sigmoid i/f/o gates and an ELU candidate, then the gated
    cell update.  Layer norm sits on the conv pre-activations and on the
    new cell state; the normalized cell is carried."""
    ch = CL_HIDDEN_CH
    b.external("cl.c_in", b.shapes[cve_out])
    cat = b.cat("cl.cat", "CL", [cve_out, h_in])
    gates = b.conv("cl.gates", "CL", cat, 3, 1, 4 * ch)
    gates = b.layer_norm("cl.ln_g", "CL", gates)
    pre_i = b.slice_ch("cl.slice_i", "CL", gates, 0, ch)
    pre_f = b.slice_ch("cl.slice_f", "CL", gates, ch, 2 * ch)
    pre_g = b.slice_ch("cl.slice_g", "CL", gates, 2 * ch, 3 * ch)
    pre_o = b.slice_ch("cl.slice_o", "CL", gates, 3 * ch, 4 * ch)
    i = b.act("cl.sig_i", KIND_SIGMOID, "CL", pre_i)
    f = b.act("cl.sig_f", KIND_SIGMOID, "CL", pre_f)
    g = b.act("cl.elu_g", KIND_ELU, "CL", pre_g)
    o = b.act("cl.sig_o", KIND_SIGMOID, "CL", pre_o)
    fc = b.mul("cl.fc", "CL", f, "cl.c_in")
    ig = b.mul("cl.ig", "CL", i, g)
    c_new = b.add("cl.c_new", "CL", fc, ig)
    c_out = b.layer_norm("cl.ln_c", "CL", c_new)
    ec = b.act("cl.elu_c", KIND_ELU, "CL", c_out)
    h_new = b.mul("cl.h_new", "CL", o, ec)
    return c_out, h_new


def _build_cvd(b: _Builder, h_new: str, cve_skips: dict[str, str], p0: str) -> str:
    """Decoder: five levels of bilinear upsampling with skip concats; each
    level emits a sigmoid depth head whose upsampled output feeds the next
    level.  The finest head is the depth output."""
    skip_by_level = {"l4": cve_skips["s2"], "l3": cve_skips["s1"],
                     "l2": cve_skips["s0"], "l1": p0, "l0": None}
    feat, depth = h_new, None
    for name, ch, n_ln_convs, n_plain_convs in CVD_LEVELS:
        up_f = b.up_bilinear(f"cvd.{name}.upf", "CVD", feat)
        parts = [up_f]
        if skip_by_level[name] is not None:
            parts.append(skip_by_level[name])
        if depth is not None:
            parts.append(b.up_bilinear(f"cvd.{name}.upd", "CVD", depth))
        x = b.cat(f"cvd.{name}.cat", "CVD", parts)
        for i in range(n_ln_convs + n_plain_convs):
            x = b.conv(f"cvd.{name}.conv{i}", "CVD", x, 3, 1, ch)
            if i < n_ln_convs:
                x = b.layer_norm(f"cvd.{name}.ln{i}", "CVD", x)
            x = b.relu(f"cvd.{name}.conv{i}_relu", "CVD", x)
        feat = x
        head = b.conv(f"cvd.{name}.head", "CVD", x, 5, 1, 1)
        depth = b.act(f"cvd.{name}.sig", KIND_SIGMOID, "CVD", head)
    return depth


def build_graph(config: PipelineConfig) -> PipelineGraph:
    b = _Builder(config)
    image = b.external("image", (3, config.height, config.width))
    taps = _build_fe(b, image)
    p0 = _build_fs(b, taps)
    fh, fw = b.shapes[p0][1], b.shapes[p0][2]
    _build_cvf(b, config, fh, fw)
    cve_out, cve_skips = _build_cve(b, taps, p0)
    # hidden-state correction: re-observe the previous hidden state from
    # the current viewpoint before the ConvLSTM consumes it
    hidden_prev = b.external("hw.hidden_prev", b.shapes[cve_out])
    hw_grid = b.external("hw.grid", (b.shapes[cve_out][1], b.shapes[cve_out][2], 2))
    h_in = b.grid_sample("hw.gs", "other", hidden_prev, hw_grid)
    c_out, h_new = _build_cl(b, cve_out, h_in)
    depth = _build_cvd(b, h_new, cve_skips, p0)
    outputs = {
        "fs_feature": p0,
        "hidden_corrected": h_in,
        "cell": c_out,
        "hidden": h_new,
        "depth_logits": depth,
    }
    return PipelineGraph(config=config, nodes=b.nodes, externals=b.externals,
                         outputs=outputs, skips=cve_skips)
