"""Command line entry point: data prep, training, inference, serving, benchmarks.

``infer`` and ``bench`` are thin clients of the service layer: they build
the same request objects the HTTP API accepts and either run them in-process
through the shared handler or POST them to ``--url``. Device selection comes
from the SKETCHSYNTH_DEVICE environment variable (default "cpu").
"""

from __future__ import annotations

import json
import os
import platform
import statistics
import sys
import urllib.request
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import torch

from . import __version__
from .data import (
    MULTI_STYLE_WEIGHTS,
    PairParams,
    build_manifest,
    generate_synthetic_photo,
    load_manifest,
    save_manifest,
)
from .imagery import encode_png, encode_png_base64
from .modeling.generator import GeneratorConfig, build_generator
from .service.app import ServiceError, handle_synthesize
from .service.registry import LoadedModel, ModelRegistry
from .service.schemas import StrokeSetModel, SynthesisRequest
from .sketch import SKETCH_STYLES, synthesize_sketch
from .training import StageConfig, run_training, stage1_preset, stage2_preset


@click.group(epilog="Device selection: set SKETCHSYNTH_DEVICE (default: cpu).")
@click.version_option(__version__)
def main() -> None:
    """Sketch- and color-stroke-guided image synthesis workbench."""


@main.command("prepare-data")
@click.option("--photos", type=click.Path(file_okay=False), required=True, help="Photo directory to scan.")
@click.option("--category", type=click.Choice(["face", "car", "bedroom"]), default="face", show_default=True)
@click.option("--val-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Manifest JSONL output path.")
@click.option("--synthetic", type=int, default=0, help="Fabricate N synthetic photos into --photos first (demo data).")
@click.option("--synthetic-size", type=int, default=256, show_default=True)
@click.option("--cache-sketches", type=click.Path(file_okay=False), default=None,
              help="Also write per-photo sketch PNGs plus param/seed sidecars here.")
@click.option("--sketch-style", type=click.Choice(sorted(SKETCH_STYLES)), default="xdog_default", show_default=True)
def prepare_data(photos, category, val_fraction, seed, out, synthetic, synthetic_size, cache_sketches, sketch_style):
    """Scan photos into a manifest with a deterministic train/val split."""
    photos_dir = Path(photos)
    if synthetic > 0:
        photos_dir.mkdir(parents=True, exist_ok=True)
        for i in range(synthetic):
            img = generate_synthetic_photo(seed * 100003 + i, synthetic_size)
            (photos_dir / f"synthetic_{i:04d}.png").write_bytes(encode_png(img.data))
        click.echo(f"wrote {synthetic} synthetic photos to {photos_dir}")
    manifest = build_manifest(photos_dir, category, val_fraction, seed)
    save_manifest(manifest, out)
    n_train = len(manifest.split_records("train"))
    n_val = len(manifest.split_records("val"))
    click.echo(f"manifest {out}: {n_train} train / {n_val} val records")

    if cache_sketches:
        from .data import load_photo

        cache = Path(cache_sketches)
        cache.mkdir(parents=True, exist_ok=True)
        params = SKETCH_STYLES[sketch_style]
        for rec in manifest.records:
            sketch = synthesize_sketch(load_photo(rec), params)
            (cache / f"{rec.id}.png").write_bytes(encode_png(sketch.data))
            sidecar = {"id": rec.id, "style": sketch_style, "seed": seed, "params": vars(params.xdog)}
            (cache / f"{rec.id}.json").write_text(json.dumps(sidecar, indent=1))
        click.echo(f"cached {len(manifest.records)} sketches to {cache}")


def _stage_config(stage, task, config_path, epochs, batch_size, g_lr, d_lr, features, no_calibration):
    cfg = stage1_preset(task) if stage == 1 else stage2_preset(task)
    gen_config = None
    if config_path:
        text = Path(config_path).read_text()
        if config_path.endswith((".yaml", ".yml")):
            import yaml

            overrides = yaml.safe_load(text)
        else:
            overrides = json.loads(text)
        gen_overrides = overrides.pop("generator", None)
        if gen_overrides:
            gen_config = GeneratorConfig(
                **{"input_channels": 4 if task == "colorization" else 3, **gen_overrides}
            )
        if "weights" in overrides:
            from .losses import LossWeights

            overrides["weights"] = LossWeights(**overrides["weights"])
        cfg = replace(cfg, **overrides)
    if epochs is not None:
        cfg = replace(cfg, epochs=epochs)
    if batch_size is not None:
        cfg = replace(cfg, batch_size=batch_size)
    if g_lr is not None:
        cfg = replace(cfg, g_learning_rate=g_lr)
    if d_lr is not None:
        cfg = replace(cfg, d_learning_rate=d_lr)
    if features is not None:
        cfg = replace(cfg, feature_extractor=features)
    if no_calibration:
        cfg = replace(cfg, calibrate_adversarial=False)
    return cfg, gen_config


@main.command("train")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False, exists=True), required=True)
@click.option("--stage", type=click.IntRange(1, 2), required=True, help="1 = content pretraining, 2 = adversarial fine-tune.")
@click.option("--task", type=click.Choice(["sketch2photo", "sketch_strokes", "colorization"]), default="sketch2photo", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, exists=True), default=None,
              help="JSON/YAML overriding StageConfig keys (epochs, batch_size, g_learning_rate, d_learning_rate, weights{w_p,w_f,w_adv,w_tv}, feature_extractor, calibrate_adversarial).")
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--g-lr", type=float, default=None)
@click.option("--d-lr", type=float, default=None)
@click.option("--features", type=click.Choice(["tiny", "vgg19/relu2_2"]), default=None,
              help="Perceptual backbone (vgg19 downloads pretrained weights).")
@click.option("--no-calibration", is_flag=True, help="Use the literal preset w_adv instead of ratio calibration.")
@click.option("--multi-style", is_flag=True, help="Draw sketch styles from the 4-style fine-tuning mix.")
@click.option("--init-from", type=click.Path(dir_okay=False, exists=True), default=None,
              help="Stage-1 checkpoint to initialize from (required for --stage 2).")
@click.option("--resume-from", type=click.Path(dir_okay=False, exists=True), default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def train(manifest_path, stage, task, out_dir, config_path, epochs, batch_size, g_lr, d_lr,
          features, no_calibration, multi_style, init_from, resume_from, max_steps, seed):
    """Run one training stage over a manifest."""
    manifest = load_manifest(manifest_path)
    cfg, gen_config = _stage_config(stage, task, config_path, epochs, batch_size, g_lr, d_lr, features, no_calibration)
    pair_params = PairParams(
        category=manifest.category,
        style_weights=MULTI_STYLE_WEIGHTS if multi_style else (("xdog_default", 1.0),),
    )
    path = run_training(
        cfg, manifest, pair_params, out_dir, gen_config=gen_config,
        init_from=init_from, resume_from=resume_from, seed=seed, max_steps=max_steps,
    )
    click.echo(f"final checkpoint: {path}")


def _post_json(url: str, payload: dict) -> dict:
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def _local_registry(model_path: str) -> tuple[ModelRegistry, str]:
    registry = ModelRegistry(os.environ.get("SKETCHSYNTH_DEVICE", "cpu"))
    model = registry.load_checkpoint(model_path)
    registry.status = "ok"
    return registry, model.model_id


@main.command("infer")
@click.option("--model", "model_path", type=click.Path(dir_okay=False, exists=True), default=None,
              help="Checkpoint to run locally (omit when using --url).")
@click.option("--url", default=None, help="Base URL of a running server, e.g. http://localhost:8000")
@click.option("--model-id", default=None, help="Model id on the server (defaults to checkpoint stem locally).")
@click.option("--input", "input_path", type=click.Path(dir_okay=False, exists=True), required=True, help="Input PNG.")
@click.option("--strokes", "strokes_path", type=click.Path(dir_okay=False, exists=True), default=None,
              help="StrokeSet JSON file.")
@click.option("--mode", type=click.Choice(["sketch2photo", "sketch_strokes", "colorization"]), default="sketch2photo", show_default=True)
@click.option("--size", type=click.Choice(["128", "256"]), default="256", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="Output PNG path.")
def infer(model_path, url, model_id, input_path, strokes_path, mode, size, output):
    """Synthesize one image from a sketch/grayscale input and optional strokes."""
    import base64

    strokes = None
    if strokes_path:
        strokes = StrokeSetModel.model_validate_json(Path(strokes_path).read_text())
    image_b64 = base64.b64encode(Path(input_path).read_bytes()).decode("ascii")

    if url:
        if not model_id:
            raise click.UsageError("--model-id is required with --url")
        req = SynthesisRequest(mode=mode, image=image_b64, strokes=strokes,
                               model_id=model_id, output_size=int(size))
        body = _post_json(url.rstrip("/") + "/v1/synthesize", req.model_dump())
        Path(output).write_bytes(base64.b64decode(body["image"]))
        click.echo(json.dumps({k: body[k] for k in ("latency_ms", "total_ms", "model_id")}))
        return

    if not model_path:
        raise click.UsageError("provide --model for local inference or --url for remote")
    registry, loaded_id = _local_registry(model_path)
    req = SynthesisRequest(mode=mode, image=image_b64, strokes=strokes,
                           model_id=model_id or loaded_id, output_size=int(size))
    try:
        resp = handle_synthesize(req, registry)
    except ServiceError as exc:
        raise click.ClickException(f"{exc.body.error}: {exc.body.detail}") from exc
    Path(output).write_bytes(base64.b64decode(resp.image))
    click.echo(json.dumps({"latency_ms": resp.latency_ms, "total_ms": resp.total_ms, "model_id": resp.model_id}))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--models-dir", type=click.Path(file_okay=False, exists=True), required=True)
@click.option("--queue-capacity", type=int, default=8, show_default=True)
def serve(host, port, models_dir, queue_capacity):
    """Serve the synthesis API over HTTP."""
    import uvicorn

    from .service.app import create_app

    app = create_app(models_dir=models_dir, queue_capacity=queue_capacity)
    uvicorn.run(app, host=host, port=port)


@main.command("bench")
@click.option("--size", type=click.Choice(["128", "256"]), default="256", show_default=True)
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--model", "model_path", type=click.Path(dir_okay=False, exists=True), default=None,
              help="Checkpoint to benchmark; omitted = randomly initialized default architecture.")
@click.option("--url", default=None, help="Benchmark a running server instead of in-process.")
@click.option("--model-id", default=None)
def bench(size, runs, model_path, url, model_id):
    """Measure synthesis latency; prints a JSON report with hardware info."""
    size = int(size)
    blank = np.ones((size, size, 1), dtype=np.float32)
    image_b64 = encode_png_base64(blank)

    if url:
        if not model_id:
            raise click.UsageError("--model-id is required with --url")
        latencies, totals = [], []
        for _ in range(runs):
            body = _post_json(
                url.rstrip("/") + "/v1/synthesize",
                SynthesisRequest(mode="sketch2photo", image=image_b64,
                                 model_id=model_id, output_size=size).model_dump(),
            )
            latencies.append(body["latency_ms"])
            totals.append(body["total_ms"])
    else:
        if model_path:
            registry, loaded_id = _local_registry(model_path)
            model_id = model_id or loaded_id
        else:
            registry = ModelRegistry(os.environ.get("SKETCHSYNTH_DEVICE", "cpu"))
            net = build_generator(GeneratorConfig(), seed=0)
            net.eval()
            registry.add(LoadedModel(model_id="bench-random", network=net,
                                     mode="sketch2photo", stage_tag="init"))
            model_id = "bench-random"
        req = SynthesisRequest(mode="sketch2photo", image=image_b64, model_id=model_id, output_size=size)
        latencies, totals = [], []
        for _ in range(runs):
            resp = handle_synthesize(req, registry)
            latencies.append(resp.latency_ms)
            totals.append(resp.total_ms)

    report = {
        "size": size,
        "runs": runs,
        "model_id": model_id,
        "latency_ms": {
            "mean": statistics.fmean(latencies),
            "median": statistics.median(latencies),
            "min": min(latencies),
            "max": max(latencies),
        },
        "total_ms_mean": statistics.fmean(totals),
        "hardware": {
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "cpu_count": os.cpu_count(),
            "torch_version": torch.__version__,
            "torch_threads": torch.get_num_threads(),
            "device": os.environ.get("SKETCHSYNTH_DEVICE", "cpu"),
            "python": sys.version.split()[0],
        },
    }
    click.echo(json.dumps(report, indent=1))


if __name__ == "__main__":
    main()
