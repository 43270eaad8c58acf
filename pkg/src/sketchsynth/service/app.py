"""HTTP API: POST /v1/synthesize, GET /v1/models, GET /v1/health.

``handle_synthesize`` is the single composition+forward path; the HTTP route
and the CLI's local mode both call it, so responses are identical either
way. ``latency_ms`` times the forward pass only; ``total_ms`` adds decode,
stroke rasterization, and encode.
"""

from __future__ import annotations

import logging
import os
import time

import numpy as np
import torch
from fastapi import FastAPI, HTTPException

from ..errors import ShapeError, StrokeError
from ..imagery import ImageBuffer, UNIT_RANGE, decode_png_base64, encode_png_base64, luma_bt601, net_to_unit, unit_to_net
from ..strokes import StrokeSet, compose_colorization_input, compose_sketch_input
from .registry import LoadedModel, ModelRegistry
from .schemas import ErrorBody, HealthResponse, ModelInfo, SynthesisRequest, SynthesisResponse
from .worker import InferenceWorker, QueueFullError

logger = logging.getLogger(__name__)


class ServiceError(Exception):
    def __init__(self, status_code: int, error: str, detail: str, stroke_index: int | None = None):
        super().__init__(detail)
        self.status_code = status_code
        self.body = ErrorBody(error=error, detail=detail, stroke_index=stroke_index)


def _decode_raster(req: SynthesisRequest) -> np.ndarray:
    try:
        arr = decode_png_base64(req.image)
    except Exception as exc:
        raise ServiceError(400, "bad_image", f"could not decode PNG: {exc}") from exc
    h, w = arr.shape[:2]
    if (h, w) != (req.output_size, req.output_size):
        raise ServiceError(
            400,
            "bad_size",
            f"raster is {h}x{w} but output_size is {req.output_size}",
        )
    return arr


def compose_request_input(req: SynthesisRequest, model: LoadedModel) -> ImageBuffer:
    """Decode the raster, rasterize strokes, and build the model input."""
    arr = _decode_raster(req)
    divisor = model.network.config.divisor
    if req.output_size % divisor:
        raise ServiceError(400, "bad_size", f"size {req.output_size} not divisible by {divisor}")

    gray = luma_bt601(arr) if arr.ndim == 3 else arr
    mono = ImageBuffer(gray[:, :, None], UNIT_RANGE, "sketch")
    try:
        strokes = (
            StrokeSet.from_json_dict(req.strokes.model_dump())
            if req.strokes is not None
            else StrokeSet([])
        )
        if req.mode == "colorization":
            made = compose_colorization_input(mono, strokes)
        else:
            made = compose_sketch_input(mono, strokes)
    except StrokeError as exc:
        raise ServiceError(400, "bad_stroke", str(exc), stroke_index=exc.stroke_index) from exc

    expected = model.network.config.input_channels
    if made.n_channels != expected:
        raise ServiceError(
            400,
            "mode_mismatch",
            f"model {model.model_id!r} expects {expected} input channels, "
            f"mode {req.mode!r} provides {made.n_channels}",
        )
    return made


def handle_synthesize(
    req: SynthesisRequest, registry: ModelRegistry, worker: InferenceWorker | None = None
) -> SynthesisResponse:
    t_start = time.perf_counter()
    model = registry.get(req.model_id)
    if model is None:
        raise ServiceError(404, "unknown_model", f"no model {req.model_id!r}; have {registry.model_ids}")

    made = compose_request_input(req, model)
    x = torch.from_numpy(unit_to_net(made.data).transpose(2, 0, 1)).unsqueeze(0)

    def forward() -> tuple[torch.Tensor, float]:
        t0 = time.perf_counter()
        with torch.no_grad():
            y = model.network(x)
        return y, (time.perf_counter() - t0) * 1000.0

    try:
        if worker is not None:
            y, latency_ms = worker.submit(forward).result()
        else:
            y, latency_ms = forward()
    except QueueFullError as exc:
        raise ServiceError(503, "overloaded", str(exc)) from exc
    except ShapeError as exc:
        raise ServiceError(400, "bad_shape", str(exc)) from exc

    image_b64 = encode_png_base64(net_to_unit(y[0].permute(1, 2, 0).numpy()))
    return SynthesisResponse(
        image=image_b64,
        latency_ms=latency_ms,
        total_ms=(time.perf_counter() - t_start) * 1000.0,
        model_id=req.model_id,
        request_hash=req.canonical_hash(),
    )


def create_app(
    models_dir: str | os.PathLike | None = None,
    registry: ModelRegistry | None = None,
    queue_capacity: int = 8,
    device: str | None = None,
) -> FastAPI:
    device = device or os.environ.get("SKETCHSYNTH_DEVICE", "cpu")
    if registry is None:
        registry = ModelRegistry(device)
        if models_dir is not None:
            registry.load_directory(models_dir)
        else:
            registry.status = "ok"
    worker = InferenceWorker(queue_capacity)

    app = FastAPI(title="sketchsynth synthesis service")
    app.state.registry = registry
    app.state.worker = worker

    @app.post("/v1/synthesize", response_model=SynthesisResponse)
    def synthesize(req: SynthesisRequest) -> SynthesisResponse:
        try:
            return handle_synthesize(req, registry, worker)
        except ServiceError as exc:
            raise HTTPException(exc.status_code, detail=exc.body.model_dump()) from exc

    @app.get("/v1/models", response_model=list[ModelInfo])
    def list_models() -> list[ModelInfo]:
        return registry.list_infos()

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status=registry.status,
            loaded_models=registry.model_ids,
            device=registry.device,
            detail=registry.detail,
        )

    return app
