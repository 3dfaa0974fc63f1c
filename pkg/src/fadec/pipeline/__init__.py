"""Recurrent multi-view-stereo depth pipeline at desk scale."""

from .config import DepthHypotheses, PipelineConfig
from .convlstm import ConvLSTMWeights, LSTMState, convlstm_step, hidden_state_warp
from .cost_volume import cost_volume_fusion
from .executor import Frame, FrameResult, forward_frame, run_scene
from .geometry import Pose, build_warp_grid, pose_distance, scale_intrinsics
from .keyframe import KeyframeBuffer, KeyframeEntry
from .model import (
    Model,
    generate_model,
    load_model,
    model_from_payload,
    model_to_payload,
    save_model,
)
from .network import PipelineGraph, build_graph
from .quant_plan import (
    CalibrationCapture,
    QuantPlan,
    build_plan,
    exponents_from_histograms,
    plan_from_file,
    plan_to_file,
)

__all__ = [
    "CalibrationCapture",
    "ConvLSTMWeights",
    "DepthHypotheses",
    "Frame",
    "FrameResult",
    "KeyframeBuffer",
    "KeyframeEntry",
    "LSTMState",
    "Model",
    "PipelineConfig",
    "PipelineGraph",
    "Pose",
    "QuantPlan",
    "build_graph",
    "build_plan",
    "build_warp_grid",
    "convlstm_step",
    "cost_volume_fusion",
    "exponents_from_histograms",
    "forward_frame",
    "generate_model",
    "hidden_state_warp",
    "load_model",
    "model_from_payload",
    "model_to_payload",
    "plan_from_file",
    "plan_to_file",
    "pose_distance",
    "run_scene",
    "save_model",
    "scale_intrinsics",
]
