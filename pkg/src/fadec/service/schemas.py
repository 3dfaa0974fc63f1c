"""Pydantic request/response models for the service API.

Tensors travel as base64-encoded FTZ/QTZ payloads so the wire format and
the file format stay bit-identical.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ModelPayload(BaseModel):
    config: dict
    seed: Optional[int] = None
    params: dict[str, str]  # param name -> base64 FTZ


class SyntheticCalibration(BaseModel):
    count: int = 4
    mean: float = 0.0
    std: float = 1.0
    seed: int = 0


class BitPlan(BaseModel):
    weight: int = 8
    bias: int = 32
    scale: int = 8
    act: int = 16


class FramePayload(BaseModel):
    image: str  # base64 FTZ
    pose: list[float]
    intrinsics: list[float]
    depth: Optional[str] = None  # base64 FTZ ground truth


class CalibrateRequest(BaseModel):
    model: ModelPayload
    frames: Optional[list[FramePayload]] = None  # scene-sample calibration
    synthetic: Optional[SyntheticCalibration] = None
    clip_rate: float = 0.95
    bits: BitPlan = Field(default_factory=BitPlan)


class CalibrateResponse(BaseModel):
    quant: dict  # quantization manifest (bits, clip_rate, exponents)
    warnings: list[str]


class InferRequest(BaseModel):
    model: ModelPayload
    frames: list[FramePayload]
    mode: Literal["float", "quant"] = "float"
    quant: Optional[dict] = None  # quantization manifest for quant mode


class InferResponse(BaseModel):
    depths: list[str]  # base64 FTZ depth maps
    metrics: dict
    frames_meta: list[dict]


class AnalyzeRequest(BaseModel):
    graph: Optional[dict] = None  # nodes/edges JSON
    reference: bool = False


class AnalyzeResponse(BaseModel):
    report: dict
    partition: dict
    table: str
    matches_reference: Optional[bool] = None


class ScheduleRequest(BaseModel):
    profile: Optional[dict] = None
    reference: bool = False
    frames: int = 4


class ScheduleResponse(BaseModel):
    timeline: dict
    metrics: dict
    svg: str


class HealthResponse(BaseModel):
    status: str
    version: str
