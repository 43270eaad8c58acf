"""Checkpoint discovery and in-memory model registry.

Weights are immutable after load; forward passes are read-only, so any
number of threads may share a loaded model (execution is serialized by the
inference worker anyway).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import CheckpointError
from ..modeling.checkpoint import load_module_tensors, read_checkpoint
from ..modeling.generator import GeneratorNetwork, build_generator
from .schemas import ModelInfo

logger = logging.getLogger(__name__)

CHECKPOINT_SUFFIX = ".ckpt"


@dataclass
class LoadedModel:
    model_id: str
    network: GeneratorNetwork
    mode: str
    stage_tag: str

    def info(self) -> ModelInfo:
        return ModelInfo(
            model_id=self.model_id,
            mode=self.mode,
            stage_tag=self.stage_tag,
            resolution_hints=[128, 256],
            param_count=self.network.param_count,
            input_channels=self.network.config.input_channels,
        )


class ModelRegistry:
    def __init__(self, device: str = "cpu"):
        self.device = device
        self.status = "loading"
        self.detail: str | None = None
        self._models: dict[str, LoadedModel] = {}

    def load_directory(self, models_dir: str | os.PathLike) -> None:
        """Load every checkpoint; corrupt ones are skipped and logged."""
        failures = []
        for path in sorted(Path(models_dir).glob(f"*{CHECKPOINT_SUFFIX}")):
            try:
                self.load_checkpoint(path)
            except CheckpointError as exc:
                failures.append(f"{path.name}: {exc}")
                logger.warning("skipping checkpoint %s: %s", path, exc)
        if failures and not self._models:
            self.status = "degraded"
            self.detail = "; ".join(failures)
        else:
            self.status = "ok"
            self.detail = "; ".join(failures) or None

    def load_checkpoint(self, path: str | os.PathLike) -> LoadedModel:
        ckpt = read_checkpoint(path)
        net = build_generator(ckpt.config)
        load_module_tensors(net, ckpt.tensors, "generator")
        net.eval()
        for p in net.parameters():
            p.requires_grad_(False)
        model = LoadedModel(
            model_id=Path(path).stem,
            network=net,
            mode=ckpt.extra.get("mode", "sketch2photo"),
            stage_tag=ckpt.stage_tag,
        )
        self._models[model.model_id] = model
        return model

    def add(self, model: LoadedModel) -> None:
        self._models[model.model_id] = model
        self.status = "ok"

    def get(self, model_id: str) -> LoadedModel | None:
        return self._models.get(model_id)

    def list_infos(self) -> list[ModelInfo]:
        return [m.info() for _, m in sorted(self._models.items())]

    @property
    def model_ids(self) -> list[str]:
        return sorted(self._models)
