"""FastAPI application wrapping the toolkit."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (
    AnalysisError,
    ConfigError,
    FadecError,
    ParseError,
    QueryError,
    ShapeError,
)
from . import handlers, schemas

_VALIDATION_ERRORS = (ConfigError, ShapeError, AnalysisError, ParseError, QueryError)


def create_app() -> FastAPI:
    app = FastAPI(title="fadec", version=handlers.health().version)

    @app.exception_handler(FadecError)
    async def _fadec_error(request: Request, exc: FadecError):
        status = 422 if isinstance(exc, _VALIDATION_ERRORS) else 500
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest):
        return handlers.calibrate(req)

    @app.post("/infer", response_model=schemas.InferResponse)
    def infer(req: schemas.InferRequest):
        return handlers.infer(req)

    @app.post("/analyze", response_model=schemas.AnalyzeResponse)
    def analyze(req: schemas.AnalyzeRequest):
        return handlers.analyze(req)

    @app.post("/schedule", response_model=schemas.ScheduleResponse)
    def schedule(req: schemas.ScheduleRequest):
        return handlers.schedule(req)

    return app
