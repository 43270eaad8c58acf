"""Versioned checkpoint container.

A checkpoint is a ZIP archive:

* ``header.json`` — UTF-8 JSON with ``format_version``, the generator
  config, a training ``stage_tag``, optional serialized RNG state, free-form
  ``extra`` metadata (step/epoch counters, preset name), and a tensor index:
  ``[{"name", "dtype", "shape", "file"}, ...]`` where ``dtype`` is a numpy
  dtype string (little-endian, e.g. ``"<f4"``).
* ``tensors/NNN.bin`` — one file per tensor, raw row-major (C-order) bytes,
  stored uncompressed.

See ``docs/checkpoint_format.md`` for the full byte-level description.
"""

from __future__ import annotations

import base64
import json
import os
import zipfile
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import CheckpointError
from .generator import GeneratorConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: GeneratorConfig
    tensors: dict[str, np.ndarray]
    stage_tag: str = "init"
    rng_state: dict | None = None
    extra: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def write_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> None:
    """Write atomically (tmp file + rename)."""
    path = os.fspath(path)
    index = []
    for i, name in enumerate(ckpt.tensors):
        arr = np.ascontiguousarray(ckpt.tensors[name])
        index.append(
            {
                "name": name,
                "dtype": arr.dtype.newbyteorder("<").str,
                "shape": list(arr.shape),
                "file": f"tensors/{i:04d}.bin",
            }
        )
    header = {
        "format_version": ckpt.format_version,
        "generator_config": ckpt.config.to_dict(),
        "stage_tag": ckpt.stage_tag,
        "rng_state": ckpt.rng_state,
        "extra": ckpt.extra,
        "tensors": index,
    }
    tmp = path + ".tmp"
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("header.json", json.dumps(header, indent=1))
        for entry, name in zip(index, ckpt.tensors):
            arr = np.ascontiguousarray(ckpt.tensors[name]).astype(entry["dtype"])
            zf.writestr(entry["file"], arr.tobytes(order="C"))
    os.replace(tmp, path)


def read_checkpoint(path: str | os.PathLike) -> Checkpoint:
    path = os.fspath(path)
    try:
        with zipfile.ZipFile(path, "r") as zf:
            header = json.loads(zf.read("header.json"))
            version = header.get("format_version")
            if version != FORMAT_VERSION:
                raise CheckpointError(f"unsupported checkpoint format version {version!r}")
            tensors = {}
            for entry in header["tensors"]:
                raw = zf.read(entry["file"])
                arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
                tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return Checkpoint(
        config=GeneratorConfig.from_dict(header["generator_config"]),
        tensors=tensors,
        stage_tag=header.get("stage_tag", "init"),
        rng_state=header.get("rng_state"),
        extra=header.get("extra", {}),
        format_version=version,
    )


def module_tensors(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    """Dump a module's state dict as prefixed numpy tensors."""
    return {
        f"{prefix}.{name}": tensor.detach().cpu().numpy().copy()
        for name, tensor in module.state_dict().items()
    }


def load_module_tensors(
    module: torch.nn.Module, tensors: dict[str, np.ndarray], prefix: str
) -> None:
    state = {}
    want = prefix + "."
    for name, arr in tensors.items():
        if name.startswith(want):
            state[name[len(want):]] = torch.from_numpy(np.ascontiguousarray(arr))
    missing = set(module.state_dict()) - set(state)
    if missing:
        raise CheckpointError(f"checkpoint missing tensors for {prefix}: {sorted(missing)[:5]}")
    module.load_state_dict(state)


def capture_rng_state(np_rng: np.random.Generator | None = None) -> dict:
    state = {"torch": base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode("ascii")}
    if np_rng is not None:
        state["numpy"] = json.loads(json.dumps(np_rng.bit_generator.state))
    return state


def restore_rng_state(state: dict, np_rng: np.random.Generator | None = None) -> None:
    raw = base64.b64decode(state["torch"])
    torch.set_rng_state(torch.from_numpy(np.frombuffer(raw, dtype=np.uint8).copy()))
    if np_rng is not None and "numpy" in state:
        np_rng.bit_generator.state = state["numpy"]
