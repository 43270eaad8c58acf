"""Two-stage training: content-only pretraining, then adversarial fine-tuning.

Stage 1 minimizes pixel+feature (+tiny TV) loss with w_adv = 0; stage 2
swaps in task-specific weights (sketch2photo drops the pixel term,
colorization emphasizes it). The preset adversarial weights (~1e8 / ~1e5)
are meaningful as ratios rather than absolutes, so by default they are
calibrated against a 1e8 reference: at fine-tune start the adversarial
term is scaled to (w_adv / 1e8) x the content term on the first batch.
Disable with ``calibrate_adversarial=False`` to use the literal weight.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .data import Batch, Manifest, PairParams, iterate_epoch
from .errors import ConfigError
from .losses import LossWeights, adversarial_loss_g, discriminator_loss, total_loss
from .modeling.checkpoint import (
    Checkpoint,
    capture_rng_state,
    load_module_tensors,
    module_tensors,
    read_checkpoint,
    restore_rng_state,
    write_checkpoint,
)
from .modeling.discriminator import DiscriminatorNetwork, build_discriminator
from .modeling.features import FeatureExtractor, TinyFeatureExtractor, VggFeatureExtractor
from .modeling.generator import GeneratorConfig, GeneratorNetwork, build_generator
from .sketch import CROP_SIZE

REFERENCE_ADV_WEIGHT = 1e8

STAGE_CONTENT = "content"
STAGE_ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class StageConfig:
    stage: str
    weights: LossWeights
    epochs: int = 3
    batch_size: int = 32
    g_learning_rate: float = 2e-4
    d_learning_rate: float = 1e-5
    mode: str = "sketch2photo"
    preset_name: str = "custom"
    feature_extractor: str = "tiny"
    calibrate_adversarial: bool = True

    def __post_init__(self) -> None:
        if self.stage not in (STAGE_CONTENT, STAGE_ADVERSARIAL):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.stage == STAGE_CONTENT and self.weights.w_adv != 0:
            raise ConfigError("content stage requires w_adv == 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.g_learning_rate <= 0 or self.d_learning_rate <= 0:
            raise ConfigError("learning rates must be positive")


def stage1_preset(mode: str = "sketch2photo") -> StageConfig:
    """Content pretraining: w_p = w_f = 1, w_tv = 1e-5, no adversary."""
    return StageConfig(
        stage=STAGE_CONTENT,
        weights=LossWeights(w_p=1.0, w_f=1.0, w_adv=0.0, w_tv=1e-5),
        epochs=3,
        batch_size=32,
        mode=mode,
        preset_name="stage1-content",
    )


def stage2_preset(task: str) -> StageConfig:
    """Adversarial fine-tuning weights per task."""
    if task == "sketch2photo":
        weights = LossWeights(w_p=0.0, w_f=1.0, w_adv=1e8, w_tv=0.0)
    elif task in ("colorization", "sketch_strokes"):
        weights = LossWeights(w_p=1.0, w_f=10.0, w_adv=1e5, w_tv=0.0)
    else:
        raise ConfigError(f"unknown task {task!r}")
    return StageConfig(
        stage=STAGE_ADVERSARIAL,
        weights=weights,
        epochs=3,
        batch_size=32,
        g_learning_rate=1e-5,
        d_learning_rate=1e-5,
        mode=task,
        preset_name=f"stage2-{task}",
    )


def make_feature_extractor(name: str) -> FeatureExtractor:
    if name == "tiny":
        return TinyFeatureExtractor(seed=0)
    if name.startswith("vgg19"):
        tap = name.split("/", 1)[1] if "/" in name else "relu2_2"
        return VggFeatureExtractor(tap_layer=tap)
    raise ConfigError(f"unknown feature extractor {name!r}")


@dataclass
class TrainState:
    generator: GeneratorNetwork
    fx: FeatureExtractor
    opt_g: torch.optim.Optimizer
    discriminator: DiscriminatorNetwork | None = None
    opt_d: torch.optim.Optimizer | None = None
    epoch: int = 0
    step: int = 0
    np_rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    recent_metrics: list = field(default_factory=list)

    def remember(self, metrics: dict, keep: int = 256) -> None:
        self.recent_metrics.append(metrics)
        del self.recent_metrics[:-keep]


def _batch_tensors(batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
    return torch.from_numpy(batch.inputs), torch.from_numpy(batch.targets)


def train_step_content(state: TrainState, batch: Batch, weights: LossWeights) -> dict:
    """One generator update on the content terms; the adversary is untouched."""
    content_weights = LossWeights(weights.w_p, weights.w_f, 0.0, weights.w_tv)
    x, y = _batch_tensors(batch)
    state.opt_g.zero_grad(set_to_none=True)
    pred = state.generator(x)
    breakdown = total_loss(pred, y, None, content_weights, state.fx)
    breakdown.total.backward()
    state.opt_g.step()
    state.step += 1
    metrics = {"step": state.step, **breakdown.floats()}
    state.remember(metrics)
    return metrics


def train_step_adversarial(state: TrainState, batch: Batch, weights: LossWeights) -> dict:
    """One discriminator update, then one generator update against it."""
    if state.discriminator is None or state.opt_d is None:
        raise ConfigError("adversarial step requires a discriminator")
    x, y = _batch_tensors(batch)

    with torch.no_grad():
        fake = state.generator(x)
    state.opt_d.zero_grad(set_to_none=True)
    d_real = state.discriminator(y)
    d_fake = state.discriminator(fake)
    d_loss = discriminator_loss(d_real, d_fake)
    d_loss.backward()
    state.opt_d.step()

    state.opt_g.zero_grad(set_to_none=True)
    pred = state.generator(x)
    g_scores = state.discriminator(pred)
    breakdown = total_loss(pred, y, g_scores, weights, state.fx)
    breakdown.total.backward()
    state.opt_g.step()
    state.step += 1

    metrics = {
        "step": state.step,
        **breakdown.floats(),
        "d_loss": float(d_loss.detach()),
        "d_real_mean": float(d_real.detach().mean()),
        "d_fake_mean": float(d_fake.detach().mean()),
        "g_score_mean": float(g_scores.detach().mean()),
    }
    state.remember(metrics)
    return metrics


class MetricsWriter:
    """Append-only JSONL; one write+flush per line so partial files stay parseable."""

    def __init__(self, path: str | os.PathLike):
        self._f = open(path, "a", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._f.write(json.dumps(record) + "\n")
        self._f.flush()

    def close(self) -> None:
        self._f.close()


def calibrated_adv_weight(weights: LossWeights, content_total: float, adv_value: float) -> float:
    """Scale w_adv so the adversarial term starts at (w_adv / 1e8) x content."""
    ratio = weights.w_adv / REFERENCE_ADV_WEIGHT
    return ratio * content_total / max(adv_value, 1e-12)


def _optimizer_tensors(opt: torch.optim.Optimizer, prefix: str) -> tuple[dict, list]:
    tensors = {}
    sd = opt.state_dict()
    for idx, st in sd["state"].items():
        for key, val in st.items():
            arr = val.detach().cpu().numpy() if isinstance(val, torch.Tensor) else np.asarray(val)
            tensors[f"{prefix}.{idx}.{key}"] = arr.copy()
    return tensors, sd["param_groups"]


def _load_optimizer(opt: torch.optim.Optimizer, tensors: dict, prefix: str, param_groups: list) -> None:
    state: dict[int, dict] = {}
    want = prefix + "."
    for name, arr in tensors.items():
        if not name.startswith(want):
            continue
        idx_s, key = name[len(want):].split(".", 1)
        state.setdefault(int(idx_s), {})[key] = torch.from_numpy(np.ascontiguousarray(arr))
    opt.load_state_dict({"state": state, "param_groups": param_groups})


def save_train_checkpoint(
    path: str | os.PathLike,
    state: TrainState,
    config: StageConfig,
    effective_weights: LossWeights,
) -> None:
    tensors = module_tensors(state.generator, "generator")
    extra = {
        "epoch": state.epoch,
        "step": state.step,
        "mode": config.mode,
        "preset_name": config.preset_name,
        "effective_weights": {
            "w_p": effective_weights.w_p,
            "w_f": effective_weights.w_f,
            "w_adv": effective_weights.w_adv,
            "w_tv": effective_weights.w_tv,
        },
    }
    opt_tensors, groups = _optimizer_tensors(state.opt_g, "opt_g")
    tensors.update(opt_tensors)
    extra["opt_g_groups"] = groups
    if state.discriminator is not None and state.opt_d is not None:
        tensors.update(module_tensors(state.discriminator, "discriminator"))
        opt_tensors, groups = _optimizer_tensors(state.opt_d, "opt_d")
        tensors.update(opt_tensors)
        extra["opt_d_groups"] = groups
        extra["discriminator_resolution"] = state.discriminator.input_resolution
    ckpt = Checkpoint(
        config=state.generator.config,
        tensors=tensors,
        stage_tag=config.stage,
        rng_state=capture_rng_state(state.np_rng),
        extra=extra,
    )
    write_checkpoint(path, ckpt)


def run_training(
    config: StageConfig,
    manifest: Manifest,
    pair_params: PairParams,
    out_dir: str | os.PathLike,
    gen_config: GeneratorConfig | None = None,
    init_from: str | os.PathLike | None = None,
    resume_from: str | os.PathLike | None = None,
    fx: FeatureExtractor | None = None,
    seed: int = 0,
    max_steps: int | None = None,
) -> str:
    """Run one stage over the manifest; returns the final checkpoint path.

    ``init_from`` seeds the generator weights from a previous stage (required
    for the adversarial stage); ``resume_from`` continues a stage run exactly
    where it stopped (optimizer state and RNG included).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.stage == STAGE_ADVERSARIAL and init_from is None and resume_from is None:
        raise ConfigError("adversarial stage requires a content-stage checkpoint (init_from)")

    torch.manual_seed(seed)
    fx = fx if fx is not None else make_feature_extractor(config.feature_extractor)

    in_channels = 4 if config.mode == "colorization" else 3
    start_epoch = 0
    resume_ckpt = None
    if resume_from is not None:
        resume_ckpt = read_checkpoint(resume_from)
        generator = build_generator(resume_ckpt.config)
        load_module_tensors(generator, resume_ckpt.tensors, "generator")
        start_epoch = int(resume_ckpt.extra["epoch"])
    elif init_from is not None:
        base = read_checkpoint(init_from)
        if base.config.input_channels != in_channels:
            raise ConfigError(
                f"checkpoint expects {base.config.input_channels} input channels, "
                f"mode {config.mode!r} needs {in_channels}"
            )
        generator = build_generator(base.config)
        load_module_tensors(generator, base.tensors, "generator")
    else:
        gcfg = gen_config or GeneratorConfig(input_channels=in_channels)
        if gcfg.input_channels != in_channels:
            raise ConfigError(f"gen_config has {gcfg.input_channels} channels, mode needs {in_channels}")
        generator = build_generator(gcfg)

    opt_g = torch.optim.Adam(generator.parameters(), lr=config.g_learning_rate)
    state = TrainState(
        generator=generator,
        fx=fx,
        opt_g=opt_g,
        np_rng=np.random.default_rng(np.random.SeedSequence([seed, manifest.seed & (2**63 - 1)])),
    )
    if config.stage == STAGE_ADVERSARIAL:
        state.discriminator = build_discriminator(CROP_SIZE)
        state.opt_d = torch.optim.Adam(state.discriminator.parameters(), lr=config.d_learning_rate)

    effective_weights = config.weights
    if resume_ckpt is not None:
        _load_optimizer(state.opt_g, resume_ckpt.tensors, "opt_g", resume_ckpt.extra["opt_g_groups"])
        if config.stage == STAGE_ADVERSARIAL:
            load_module_tensors(state.discriminator, resume_ckpt.tensors, "discriminator")
            _load_optimizer(state.opt_d, resume_ckpt.tensors, "opt_d", resume_ckpt.extra["opt_d_groups"])
        state.epoch = start_epoch
        state.step = int(resume_ckpt.extra["step"])
        saved = resume_ckpt.extra.get("effective_weights")
        if saved:
            effective_weights = LossWeights(**saved)
        if resume_ckpt.rng_state:
            restore_rng_state(resume_ckpt.rng_state, state.np_rng)
    elif config.stage == STAGE_ADVERSARIAL and config.calibrate_adversarial and config.weights.w_adv > 0:
        effective_weights = replace(
            config.weights,
            w_adv=_calibrate_on_first_batch(state, manifest, config, pair_params),
        )

    metrics = MetricsWriter(out / "metrics.jsonl")
    metrics.write(
        {
            "event": "run_start",
            "stage": config.stage,
            "mode": config.mode,
            "preset": config.preset_name,
            "weights": {
                "w_p": effective_weights.w_p,
                "w_f": effective_weights.w_f,
                "w_adv": effective_weights.w_adv,
                "w_tv": effective_weights.w_tv,
            },
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "resumed_from_epoch": start_epoch if resume_from else None,
        }
    )

    last_path = None
    stop = False
    try:
        for epoch in range(start_epoch, config.epochs):
            for batch in iterate_epoch(manifest, config.mode, config.batch_size, epoch, pair_params):
                t0 = time.monotonic()
                if config.stage == STAGE_CONTENT:
                    m = train_step_content(state, batch, effective_weights)
                else:
                    m = train_step_adversarial(state, batch, effective_weights)
                m["epoch"] = epoch
                m["wall_time_s"] = time.monotonic() - t0
                metrics.write(m)
                if max_steps is not None and state.step >= max_steps:
                    stop = True
                    break
            state.epoch = epoch + 1
            last_path = str(out / f"epoch_{state.epoch:04d}.ckpt")
            save_train_checkpoint(last_path, state, config, effective_weights)
            metrics.write({"event": "checkpoint", "path": last_path, "epoch": state.epoch})
            if stop:
                break
    finally:
        metrics.close()
    if last_path is None:
        last_path = str(out / "epoch_0000.ckpt")
        save_train_checkpoint(last_path, state, config, effective_weights)
    return last_path


def _calibrate_on_first_batch(
    state: TrainState, manifest: Manifest, config: StageConfig, pair_params: PairParams
) -> float:
    batch = next(iterate_epoch(manifest, config.mode, config.batch_size, 0, pair_params))
    x, y = _batch_tensors(batch)
    with torch.no_grad():
        pred = state.generator(x)
        scores = state.discriminator(pred)
        content = LossWeights(config.weights.w_p, config.weights.w_f, 0.0, config.weights.w_tv)
        bd = total_loss(pred, y, None, content, state.fx)
        adv = adversarial_loss_g(scores)
    return calibrated_adv_weight(config.weights, float(bd.total), float(adv))
