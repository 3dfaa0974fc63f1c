"""Model parameters: seeded generation, normalization folding, manifest I/O.

A model is the pipeline configuration plus one FTensor per parameter:
``<conv node>.w/.b/.s`` for convolutions and ``<norm node>.gamma/.beta``
for layer norms.  Generated convolutions come with batch-normalization
parameters that are folded into the stored weights and bias, the way a
trained checkpoint is prepared for inference.

The manifest JSON names each parameter tensor file; activation/parameter
exponents produced by calibration live in a quantization manifest next
to it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError
from ..graph import KIND_CONV, KIND_LAYER_NORM
from ..quantize import fold_batchnorm
from ..seeding import named_rng
from ..tensor import FTensor, load_tensor, save_tensor
from .config import PipelineConfig
from .network import PipelineGraph, build_graph


@dataclass
class Model:
    config: PipelineConfig
    params: dict[str, FTensor]
    seed: int | None = None
    _graph: PipelineGraph | None = field(default=None, repr=False)

    @property
    def graph(self) -> PipelineGraph:
        if self._graph is None:
            self._graph = build_graph(self.config)
        return self._graph


def _conv_gain(node_id: str, residual_project: bool) -> float:
    if node_id.endswith(".project"):
        return 0.7071067811865476 if residual_project else 1.0
    if ".head" in node_id or node_id.startswith("fs.") or node_id == "cl.gates":
        return 1.0
    return 1.4142135623730951  # relu-facing convs


def _rescale_to_unit_outputs(model: Model, seed: int) -> None:
    """Rescale each convolution so its output has roughly unit std on a
    probe input.

    Randomly initialized deep conv/ReLU chains drift over orders of
    magnitude, which would bury the recurrent and skip signals; trained
    checkpoints do not behave like that, so generated ones should not
    either.  The rescaling happens inside one forward pass, node by
    node, so every downstream operator already sees normalized inputs.
    """
    from .executor import Frame, forward_frame
    from .geometry import Pose, default_intrinsics

    cfg = model.config
    rng = named_rng(seed, "probe")
    probe = Frame(
        image=FTensor.from_array(rng.normal(size=(3, cfg.height, cfg.width))),
        pose=Pose.identity(),
        intrinsics=default_intrinsics(cfg.height, cfg.width),
    )

    def hook(node, value):
        if node.kind != KIND_CONV:
            return value
        arr = value.array
        std = float(arr.std())
        # also bound the activation tail: long-tailed feature maps would
        # make per-tensor range calibration needlessly seed-dependent
        tail = float(np.quantile(np.abs(arr), 0.999)) / 3.5
        factor = max(std, tail)
        if factor < 1e-6:
            return value
        for suffix in (".w", ".b"):
            name = node.id + suffix
            model.params[name] = FTensor.from_array(
                model.params[name].array / factor)
        return FTensor.from_array(arr / factor)

    forward_frame(model, probe, node_hook=hook)


def generate_model(config: PipelineConfig, seed: int) -> Model:
    """Seeded random desk-scale model with folded normalization, rescaled
    so every convolution produces roughly unit-std activations."""
    graph = build_graph(config)
    node_ids = {n.id for n in graph.nodes}
    params: dict[str, FTensor] = {}
    for node in graph.nodes:
        if node.kind == KIND_CONV:
            spec = node.spec
            rng = named_rng(seed, f"param.{node.id}")
            fan_in = spec.in_ch * spec.kernel * spec.kernel
            gain = _conv_gain(node.id,
                              node.id.replace(".project", ".add") in node_ids)
            w = rng.normal(0.0, gain / np.sqrt(fan_in),
                           size=(spec.out_ch, spec.in_ch, spec.kernel, spec.kernel))
            b = rng.normal(0.0, 0.5 if ".head" in node.id else 0.02,
                           size=spec.out_ch)
            s = rng.uniform(0.8, 1.2, size=1)
            gamma = rng.uniform(0.9, 1.1, size=spec.out_ch)
            beta = rng.normal(0.0, 0.02, size=spec.out_ch)
            mean = rng.normal(0.0, 0.05, size=spec.out_ch)
            var = rng.uniform(0.6, 1.4, size=spec.out_ch)
            wf, bf = fold_batchnorm(
                FTensor.from_array(w), FTensor.from_array(b),
                FTensor.from_array(gamma), FTensor.from_array(beta),
                FTensor.from_array(mean), FTensor.from_array(var))
            params[f"{node.id}.w"] = wf
            params[f"{node.id}.b"] = bf
            params[f"{node.id}.s"] = FTensor.from_array(s)
        elif node.kind == KIND_LAYER_NORM:
            ch = node.out_shape[0]
            rng = named_rng(seed, f"param.{node.id}")
            params[f"{node.id}.gamma"] = FTensor.from_array(
                rng.uniform(0.9, 1.1, size=(ch, 1, 1)))
            params[f"{node.id}.beta"] = FTensor.from_array(
                rng.normal(0.0, 0.02, size=(ch, 1, 1)))
    model = Model(config=config, params=params, seed=seed)
    model._graph = graph
    _rescale_to_unit_outputs(model, seed)
    return model


def save_model(model: Model, out_dir) -> str:
    """Write manifest.json plus one FTZ file per parameter tensor."""
    out_dir = str(out_dir)
    param_dir = os.path.join(out_dir, "params")
    os.makedirs(param_dir, exist_ok=True)
    entries = {}
    for name in sorted(model.params):
        rel = os.path.join("params", name + ".ftz")
        save_tensor(os.path.join(out_dir, rel), model.params[name])
        entries[name] = rel
    manifest = {
        "config": model.config.to_json(),
        "seed": model.seed,
        "params": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return path


def load_model(manifest_path) -> Model:
    manifest_path = str(manifest_path)
    with open(manifest_path) as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{manifest_path}: {e}") from e
    for key in ("config", "params"):
        if key not in manifest:
            raise ParseError(f"{manifest_path}: missing field '{key}'")
    base = os.path.dirname(manifest_path)
    config = PipelineConfig.from_json(manifest["config"])
    params = {name: load_tensor(os.path.join(base, rel))
              for name, rel in manifest["params"].items()}
    return Model(config=config, params=params, seed=manifest.get("seed"))


def model_to_payload(model: Model) -> dict:
    """Inline JSON form used on the service wire."""
    from ..tensor import tensor_to_b64

    return {
        "config": model.config.to_json(),
        "seed": model.seed,
        "params": {name: tensor_to_b64(t) for name, t in sorted(model.params.items())},
    }


def model_from_payload(obj: dict) -> Model:
    from ..tensor import tensor_from_b64

    config = PipelineConfig.from_json(obj["config"])
    params = {name: tensor_from_b64(t) for name, t in obj["params"].items()}
    return Model(config=config, params=params, seed=obj.get("seed"))
