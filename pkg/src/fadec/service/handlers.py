"""Service operations: pure functions from request models to response
models.

The FastAPI endpoints and the local CLI both call these, so running
against a remote server and running in-process produce identical
results.
"""

from __future__ import annotations

import numpy as np

from .. import __version__
from ..analysis import (
    REFERENCE_OPERATOR_COUNTS,
    analyze_workload,
    census_table,
    partition_hw_sw,
    reference_graph,
)
from ..errors import ConfigError, ParseError
from ..graph import graph_from_json
from ..pipeline import (
    CalibrationCapture,
    Frame,
    Pose,
    build_plan,
    exponents_from_histograms,
    model_from_payload,
    run_scene,
)
from ..quantize import QuantParams
from ..schedule import (
    ScheduleProfile,
    extern_overhead_share,
    hidden_fractions,
    overlap_hidden_fraction,
    reference_profile,
    render_gantt,
    simulate_schedule,
    speedup_vs_serial,
)
from ..tensor import FTensor, tensor_from_b64, tensor_to_b64
from . import schemas


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


def _quant_params(req: schemas.CalibrateRequest) -> QuantParams:
    return QuantParams(
        weight_bits=req.bits.weight,
        bias_bits=req.bits.bias,
        scale_bits=req.bits.scale,
        act_bits=req.bits.act,
        clip_rate=req.clip_rate,
    )


def calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
    model = model_from_payload(req.model.model_dump())
    qp = _quant_params(req)
    if req.frames:
        frames, _ = _frames_from_payload(req.frames)
    elif req.synthetic is not None:
        from ..synth import calibration_frames

        frames = calibration_frames(req.synthetic.seed, req.synthetic.count,
                                    model.config, req.synthetic.mean,
                                    req.synthetic.std)
    else:
        raise ConfigError("calibration needs scene samples or a synthetic spec")
    if not frames:
        raise ConfigError("calibration sample set is empty")
    capture = CalibrationCapture(qp.act_bits)
    run_scene(model, frames, mode="float", capture=capture)
    act_exps, warnings = exponents_from_histograms(capture.hists, qp.clip_rate)
    plan = build_plan(model, act_exps, qp)
    return schemas.CalibrateResponse(quant=plan.to_json(),
                                     warnings=warnings + plan.warnings)


def _frames_from_payload(payloads: list[schemas.FramePayload]):
    frames, gts = [], []
    for i, fp in enumerate(payloads):
        if len(fp.pose) != 16:
            raise ParseError(f"frame {i}: field 'pose' must have 16 values")
        if len(fp.intrinsics) != 9:
            raise ParseError(f"frame {i}: field 'intrinsics' must have 9 values")
        frames.append(Frame(
            image=tensor_from_b64(fp.image),
            pose=Pose(np.asarray(fp.pose, dtype=np.float64).reshape(4, 4)),
            intrinsics=np.asarray(fp.intrinsics, dtype=np.float64).reshape(3, 3),
        ))
        gts.append(tensor_from_b64(fp.depth) if fp.depth else None)
    return frames, gts


def _mse(a: FTensor, b: FTensor) -> float:
    return float(np.mean((a.array - b.array) ** 2))


def infer(req: schemas.InferRequest) -> schemas.InferResponse:
    model = model_from_payload(req.model.model_dump())
    frames, gts = _frames_from_payload(req.frames)
    if not frames:
        raise ConfigError("no frames to process")

    float_depths, float_metas = run_scene(model, frames, mode="float")
    metrics: dict = {"mode": req.mode, "frames": []}
    if req.mode == "quant":
        if req.quant is None:
            raise ConfigError("quant mode requires a quantization manifest")
        plan = _plan_from_manifest(model, req.quant)
        depths, metas = run_scene(model, frames, mode="quant", plan=plan)
    else:
        depths, metas = float_depths, float_metas

    sum_f = sum_q = 0.0
    have_gt = False
    for i, (dep, gt) in enumerate(zip(depths, gts)):
        entry: dict = {"index": i}
        if gt is not None:
            have_gt = True
            entry["mse_vs_gt"] = _mse(dep, gt)
            sum_f += _mse(float_depths[i], gt)
            sum_q += _mse(dep, gt)
        if req.mode == "quant":
            entry["mse_vs_float_oracle"] = _mse(dep, float_depths[i])
        metrics["frames"].append(entry)
    if req.mode == "quant" and have_gt:
        metrics["quant_vs_float_mse_ratio"] = sum_q / sum_f if sum_f else None
    return schemas.InferResponse(
        depths=[tensor_to_b64(d) for d in depths],
        metrics=metrics,
        frames_meta=metas,
    )


def _plan_from_manifest(model, manifest: dict):
    try:
        bits = manifest["bits"]
        qp = QuantParams(
            weight_bits=bits["weight"], bias_bits=bits["bias"],
            scale_bits=bits["scale"], act_bits=bits["act"],
            clip_rate=manifest.get("clip_rate", 0.95),
        )
        act_exps = {k: int(v) for k, v in manifest["act_exps"].items()}
    except (KeyError, TypeError) as e:
        raise ParseError(f"quantization manifest missing field: {e}") from e
    return build_plan(model, act_exps, qp)


def analyze(req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
    if req.reference:
        graph = reference_graph()
    elif req.graph is not None:
        graph = graph_from_json(req.graph)
    else:
        raise ConfigError("provide a graph or set reference=true")
    report = analyze_workload(graph)
    plan = partition_hw_sw(graph)
    matches = None
    if req.reference:
        matches = all(report.instance_counts.get(p, {}) == rows
                      for p, rows in REFERENCE_OPERATOR_COUNTS.items())
    return schemas.AnalyzeResponse(
        report=report.to_json(),
        partition=plan.to_json(),
        table=census_table(report.instance_counts),
        matches_reference=matches,
    )


def schedule(req: schemas.ScheduleRequest) -> schemas.ScheduleResponse:
    if req.reference:
        profile = reference_profile()
    elif req.profile is not None:
        profile = ScheduleProfile.from_json(req.profile)
    else:
        raise ConfigError("provide a profile or set reference=true")
    timeline = simulate_schedule(profile, frames=req.frames)
    names = {s.name for s in profile.stages}
    cvf_stages = [n for n in ("CVF-prep", "CVF-final") if n in names]
    metrics = {
        "makespan_us": timeline.makespan(),
        "frame_makespan_us": timeline.frame_makespan(timeline.steady_frame()),
        "overhead_total_us": timeline.overhead_total_us,
        "extern_overhead_share": extern_overhead_share(timeline),
        "hidden_fractions": hidden_fractions(timeline),
        "speedup_vs_serial": speedup_vs_serial(timeline),
    }
    if cvf_stages:
        metrics["cvf_hidden_fraction"] = overlap_hidden_fraction(
            timeline, tuple(cvf_stages))
    return schemas.ScheduleResponse(
        timeline=timeline.to_json(),
        metrics=metrics,
        svg=render_gantt(timeline),
    )
