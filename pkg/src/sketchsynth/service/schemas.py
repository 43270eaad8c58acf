"""Request/response models for the synthesis API.

Images travel as base64-encoded lossless PNG inside JSON; strokes travel as
vectors in the shared StrokeSet schema and are rasterized server-side with
the canonical library rule, so client and server renderings can never
diverge.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

Mode = Literal["sketch2photo", "sketch_strokes", "colorization"]


class StrokeModel(BaseModel):
    points: list[list[float]] = Field(min_length=1)
    color: list[float] = Field(min_length=3, max_length=3)
    width: float = Field(ge=1)

    @field_validator("points")
    @classmethod
    def _points_are_pairs(cls, pts: list[list[float]]) -> list[list[float]]:
        for p in pts:
            if len(p) != 2:
                raise ValueError(f"point must be [x, y], got {p}")
        return pts

    @field_validator("color")
    @classmethod
    def _color_in_unit(cls, c: list[float]) -> list[float]:
        if any(v < 0 or v > 1 for v in c):
            raise ValueError(f"color components must be in [0, 1], got {c}")
        return c


class StrokeSetModel(BaseModel):
    strokes: list[StrokeModel] = Field(default_factory=list)


class SynthesisRequest(BaseModel):
    mode: Mode
    image: str = Field(description="base64 PNG; the sketch for sketch modes, the grayscale photo for colorization")
    strokes: Optional[StrokeSetModel] = None
    model_id: str
    output_size: Literal[128, 256] = 256

    def canonical_hash(self) -> str:
        """sha256 over (mode, image b64, compact sorted strokes JSON, size)."""
        strokes = (
            json.dumps(self.strokes.model_dump(), sort_keys=True, separators=(",", ":"))
            if self.strokes is not None
            else ""
        )
        payload = "\n".join([self.mode, self.image, strokes, str(self.output_size)])
        return hashlib.sha256(payload.encode()).hexdigest()


class SynthesisResponse(BaseModel):
    image: str
    latency_ms: float = Field(description="forward pass only")
    total_ms: float = Field(description="decode + compose + forward + encode")
    model_id: str
    request_hash: str


class ModelInfo(BaseModel):
    model_id: str
    mode: str
    stage_tag: str
    resolution_hints: list[int]
    param_count: int
    input_channels: int


class HealthResponse(BaseModel):
    status: Literal["ok", "loading", "degraded"]
    loaded_models: list[str]
    device: str
    detail: Optional[str] = None


class ErrorBody(BaseModel):
    error: str
    detail: str
    stroke_index: Optional[int] = None
