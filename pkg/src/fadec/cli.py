"""Command-line client.

Every command builds a service request from local files, dispatches it
(in-process by default, or to a remote server with --server), and writes
the response artifacts to the output directory.  Exit codes: 0 success,
1 validation/usage error, 2 I/O error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import (
    AnalysisError,
    ConfigError,
    FadecError,
    ParseError,
    QueryError,
    ShapeError,
)
from .pipeline import PipelineConfig, generate_model, load_model, model_to_payload, save_model
from .schedule import load_profile
from .service import handlers, schemas
from .synth import load_scene, make_scene
from .tensor import save_tensor, tensor_from_b64, tensor_to_b64

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

_VALIDATION_ERRORS = (ConfigError, ShapeError, AnalysisError, ParseError, QueryError)


class RemoteError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status


class Client:
    """Dispatches requests in-process or over HTTP."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def call(self, op: str, request, response_cls):
        if self.server is None:
            return getattr(handlers, op)(request)
        import httpx

        resp = httpx.post(f"{self.server}/{op}",
                          json=request.model_dump(), timeout=600.0)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise RemoteError(resp.status_code, detail)
        return response_cls(**resp.json())


def _out_dir(args) -> str:
    out = args.out or os.environ.get("FADEC_OUT_DIR") or "fadec-out"
    os.makedirs(out, exist_ok=True)
    return out


def _dump_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _emit(args, obj, human_lines=()) -> None:
    if args.json:
        print(json.dumps(obj, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _model_payload(path: str) -> schemas.ModelPayload:
    model = load_model(path)
    return schemas.ModelPayload(**model_to_payload(model))


def _frames_payload(scene_dir: str) -> list[schemas.FramePayload]:
    frames, gts = load_scene(scene_dir)
    out = []
    for frame, gt in zip(frames, gts):
        out.append(schemas.FramePayload(
            image=tensor_to_b64(frame.image),
            pose=[float(v) for v in frame.pose.matrix.reshape(-1)],
            intrinsics=[float(v) for v in frame.intrinsics.reshape(-1)],
            depth=tensor_to_b64(gt) if gt is not None else None,
        ))
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_make_model(args, client: Client) -> int:
    config = PipelineConfig(
        height=args.height, width=args.width, hyp_count=args.hyp_count,
        measurement_frames=args.measurement_frames,
        kb_capacity=args.kb_capacity,
    )
    model = generate_model(config, seed=args.seed)
    out = _out_dir(args)
    path = save_model(model, out)
    _emit(args, {"manifest": path}, [f"wrote {path}"])
    return EXIT_OK


def cmd_make_scene(args, client: Client) -> int:
    config = PipelineConfig(height=args.height, width=args.width)
    out = _out_dir(args)
    make_scene(out, seed=args.seed, n_frames=args.frames, config=config,
               mean=args.mean, std=args.std, plane_depth=args.plane_depth)
    _emit(args, {"scene": out, "frames": args.frames},
          [f"wrote {args.frames} frames to {out}"])
    return EXIT_OK


def cmd_calibrate(args, client: Client) -> int:
    req = schemas.CalibrateRequest(
        model=_model_payload(args.model),
        frames=_frames_payload(args.scene) if args.scene else None,
        synthetic=schemas.SyntheticCalibration(
            count=args.synthetic, mean=args.mean, std=args.std, seed=args.seed)
        if args.synthetic else None,
        clip_rate=args.alpha,
    )
    resp = client.call("calibrate", req, schemas.CalibrateResponse)
    out = _out_dir(args)
    path = os.path.join(out, "quant.json")
    _dump_json(path, resp.quant)
    for w in resp.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(args, {"quant": path, "warnings": resp.warnings}, [f"wrote {path}"])
    return EXIT_OK


def cmd_infer(args, client: Client) -> int:
    quant = None
    if args.mode == "quant":
        quant_path = args.quant or os.path.join(os.path.dirname(args.model),
                                                "quant.json")
        with open(quant_path) as f:
            quant = json.load(f)
    req = schemas.InferRequest(
        model=_model_payload(args.model),
        frames=_frames_payload(args.scene),
        mode=args.mode,
        quant=quant,
    )
    resp = client.call("infer", req, schemas.InferResponse)
    out = _out_dir(args)
    depth_files = []
    for i, payload in enumerate(resp.depths):
        path = os.path.join(out, f"depth_{i:04d}.ftz")
        save_tensor(path, tensor_from_b64(payload))
        depth_files.append(path)
    metrics = dict(resp.metrics)
    metrics["frames_meta"] = resp.frames_meta
    _dump_json(os.path.join(out, "metrics.json"), metrics)
    lines = [f"wrote {len(depth_files)} depth maps to {out}"]
    if "quant_vs_float_mse_ratio" in resp.metrics:
        lines.append(
            f"quant-vs-float MSE ratio: {resp.metrics['quant_vs_float_mse_ratio']:.4f}")
    _emit(args, {"depths": depth_files, "metrics": metrics}, lines)
    return EXIT_OK


def cmd_analyze(args, client: Client) -> int:
    graph = None
    if args.graph:
        with open(args.graph) as f:
            graph = json.load(f)
    req = schemas.AnalyzeRequest(graph=graph, reference=args.reference)
    resp = client.call("analyze", req, schemas.AnalyzeResponse)
    out = _out_dir(args)
    _dump_json(os.path.join(out, "report.json"), resp.report)
    _dump_json(os.path.join(out, "partition.json"), resp.partition)
    with open(os.path.join(out, "census.txt"), "w") as f:
        f.write(resp.table + "\n")
    payload = {"report": resp.report, "partition": resp.partition,
               "matches_reference": resp.matches_reference}
    _emit(args, payload, [resp.table])
    if args.reference and not resp.matches_reference:
        print("error: reference census mismatch", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_schedule(args, client: Client) -> int:
    profile = None
    if args.profile:
        profile = load_profile(args.profile).to_json()
    req = schemas.ScheduleRequest(profile=profile, reference=args.reference,
                                  frames=args.frames)
    resp = client.call("schedule", req, schemas.ScheduleResponse)
    out = _out_dir(args)
    _dump_json(os.path.join(out, "timeline.json"), resp.timeline)
    with open(os.path.join(out, "gantt.svg"), "w") as f:
        f.write(resp.svg + "\n")
    m = resp.metrics
    hidden = ", ".join(f"{name}={frac:.3g}"
                       for name, frac in sorted(m["hidden_fractions"].items())
                       if frac > 0)
    lines = [
        f"makespan: {m['makespan_us']} us "
        f"(steady frame {m['frame_makespan_us']} us)",
        f"hidden fractions: {hidden or 'none'}",
        f"extern overhead share: {m['extern_overhead_share']:.4g}",
        f"speedup vs serial: {m['speedup_vs_serial']:.4g}",
    ]
    if "cvf_hidden_fraction" in m:
        lines.insert(1, f"CVF hidden fraction: {m['cvf_hidden_fraction']:.4g}")
    _emit(args, {"timeline": resp.timeline, "metrics": m}, lines)
    return EXIT_OK


def cmd_serve(args, client: Client) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fadec",
        description="Fixed-point recurrent depth-estimation toolkit: "
                    "calibrate, infer, analyze, schedule.",
    )
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("--server", help="dispatch to a running service URL")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory "
                       "(default: $FADEC_OUT_DIR or ./fadec-out)")
        p.add_argument("--json", action="store_true",
                       help="machine-readable JSON on stdout")

    p = sub.add_parser("make-model", help="generate a seeded desk-scale model")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--hyp-count", type=int, default=64)
    p.add_argument("--measurement-frames", type=int, default=2)
    p.add_argument("--kb-capacity", type=int, default=8)
    p.set_defaults(func=cmd_make_model)

    p = sub.add_parser("make-scene", help="generate a synthetic scene")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--std", type=float, default=1.0)
    p.add_argument("--plane-depth", type=float, default=2.0)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("calibrate", help="calibrate activation exponents")
    common(p)
    p.add_argument("--model", required=True, help="model manifest JSON")
    p.add_argument("--scene", help="scene directory with calibration images")
    p.add_argument("--synthetic", type=int, default=0,
                   help="number of synthetic calibration images")
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.95,
                   help="clipping rate for activation calibration")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("infer", help="run depth estimation over a scene")
    common(p)
    p.add_argument("--model", required=True, help="model manifest JSON")
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--mode", choices=("float", "quant"), default="float")
    p.add_argument("--quant", help="quantization manifest "
                   "(default: quant.json next to the model manifest)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("analyze", help="workload census and HW/SW partition")
    common(p)
    p.add_argument("--graph", help="operator graph JSON")
    p.add_argument("--reference", action="store_true",
                   help="analyze the built-in reference graph")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("schedule", help="simulate the PL/CPU schedule")
    common(p)
    p.add_argument("--profile", help="stage profile JSON")
    p.add_argument("--reference", action="store_true",
                   help="simulate the documented reference profile")
    p.add_argument("--frames", type=int, default=4)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    if defaults:
        # subcommands parse into a fresh namespace, so config-supplied
        # defaults must reach each subparser directly
        parser.set_defaults(**defaults)
        for sp in sub.choices.values():
            sp.set_defaults(**defaults)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # --config supplies defaults; explicit flags still win
    defaults = None
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            with open(cfg_path) as f:
                overrides = json.load(f)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
        except json.JSONDecodeError as e:
            print(f"error: {cfg_path}: {e}", file=sys.stderr)
            return EXIT_VALIDATION
        defaults = {k.replace("-", "_"): v for k, v in overrides.items()}
    parser = build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_VALIDATION if e.code not in (0, None) else EXIT_OK
    client = Client(args.server)
    try:
        return args.func(args, client)
    except _VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RemoteError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION if e.status in (400, 422) else EXIT_INTERNAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except FadecError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
