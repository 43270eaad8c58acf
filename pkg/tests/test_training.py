import json
import math
from pathlib import Path

import numpy as np
import pytest
import torch

from conftest import tiny_gen_config
from sketchsynth.data import Batch, PairParams, build_manifest, generate_synthetic_photo
from sketchsynth.errors import ConfigError
from sketchsynth.imagery import encode_png
from sketchsynth.losses import LossWeights, discriminator_loss
from sketchsynth.modeling.checkpoint import read_checkpoint
from sketchsynth.modeling.discriminator import build_discriminator
from sketchsynth.modeling.features import TinyFeatureExtractor
from sketchsynth.modeling.generator import build_generator
from sketchsynth.training import (
    TrainState,
    calibrated_adv_weight,
    run_training,
    stage1_preset,
    stage2_preset,
    train_step_adversarial,
    train_step_content,
)


def random_batch(rng, n=2, size=32, channels=3) -> Batch:
    return Batch(
        inputs=rng.uniform(-1, 1, (n, channels, size, size)).astype(np.float32),
        targets=rng.uniform(-1, 1, (n, 3, size, size)).astype(np.float32),
        record_ids=[f"r{i}" for i in range(n)],
        mode="sketch2photo",
    )


def make_state(seed=0, adversarial=False, size=32, lr=1e-3) -> TrainState:
    gen = build_generator(tiny_gen_config(), seed=seed)
    state = TrainState(
        generator=gen,
        fx=TinyFeatureExtractor(seed=0),
        opt_g=torch.optim.Adam(gen.parameters(), lr=lr),
    )
    if adversarial:
        state.discriminator = build_discriminator(size, seed=seed + 1)
        state.opt_d = torch.optim.Adam(state.discriminator.parameters(), lr=1e-4)
    return state


# ------------------------------------------------------------------- presets

def test_stage1_preset_values():
    cfg = stage1_preset()
    assert (cfg.weights.w_p, cfg.weights.w_f, cfg.weights.w_adv, cfg.weights.w_tv) == (1.0, 1.0, 0.0, 1e-5)
    assert cfg.batch_size == 32
    assert cfg.epochs == 3
    assert cfg.stage == "content"


def test_stage2_preset_values():
    s2p = stage2_preset("sketch2photo")
    assert (s2p.weights.w_f, s2p.weights.w_p, s2p.weights.w_tv) == (1.0, 0.0, 0.0)
    assert s2p.weights.w_adv == pytest.approx(1e8)
    col = stage2_preset("colorization")
    assert (col.weights.w_f, col.weights.w_p, col.weights.w_tv) == (10.0, 1.0, 0.0)
    assert col.weights.w_adv == pytest.approx(1e5)
    for cfg in (s2p, col):
        assert 1e-6 <= cfg.d_learning_rate <= 1e-5
    with pytest.raises(ConfigError):
        stage2_preset("superres")


def test_content_stage_config_rejects_adversarial_weight():
    with pytest.raises(ConfigError):
        from sketchsynth.training import StageConfig

        StageConfig(stage="content", weights=LossWeights(1, 1, 1, 0))


# ---------------------------------------------------------------- train steps

def test_content_step_decreases_loss_and_forces_w_adv_zero(rng):
    state = make_state()
    batch = random_batch(rng)
    weights = LossWeights(1.0, 1.0, 0.0, 1e-5)
    first = train_step_content(state, batch, weights)
    assert all(math.isfinite(v) for k, v in first.items())
    assert first["l_adv"] == 0.0
    for _ in range(60):
        last = train_step_content(state, batch, weights)
    assert last["total"] < first["total"]
    assert state.discriminator is None


def test_content_step_leaves_feature_extractor_untouched(rng):
    state = make_state()
    before = [p.detach().clone() for p in state.fx.parameters()]
    for _ in range(3):
        train_step_content(state, random_batch(rng), LossWeights(1, 1, 0, 0))
    for a, b in zip(before, state.fx.parameters()):
        assert torch.equal(a, b)


def test_optimizers_partition_parameters():
    state = make_state(adversarial=True)
    g_params = {id(p) for p in state.generator.parameters()}
    d_params = {id(p) for p in state.discriminator.parameters()}
    opt_g_params = {id(p) for group in state.opt_g.param_groups for p in group["params"]}
    opt_d_params = {id(p) for group in state.opt_d.param_groups for p in group["params"]}
    assert opt_g_params == g_params
    assert opt_d_params == d_params
    assert not (opt_g_params & opt_d_params)


def test_adversarial_step_d_loss_improves_on_same_batch(rng):
    state = make_state(adversarial=True)
    batch = random_batch(rng)
    x, y = torch.from_numpy(batch.inputs), torch.from_numpy(batch.targets)
    with torch.no_grad():
        fake = state.generator(x)
        before = float(discriminator_loss(state.discriminator(y), state.discriminator(fake)))
    train_step_adversarial(state, batch, LossWeights(1, 1, 1e-3, 0))
    with torch.no_grad():
        after = float(discriminator_loss(state.discriminator(y), state.discriminator(fake)))
    assert after <= before + 1e-6


def test_adversarial_step_with_zero_adv_weight_still_updates_d(rng):
    state = make_state(adversarial=True)
    batch = random_batch(rng)
    d_before = [p.detach().clone() for p in state.discriminator.parameters()]
    m = train_step_adversarial(state, batch, LossWeights(1, 1, 0, 0))
    assert m["l_adv"] >= 0.0
    assert any(not torch.equal(a, b) for a, b in zip(d_before, state.discriminator.parameters()))


def test_discriminator_only_sees_images():
    import inspect

    from sketchsynth.modeling.discriminator import DiscriminatorNetwork

    sig = inspect.signature(DiscriminatorNetwork.forward)
    assert list(sig.parameters) == ["self", "x"]  # no conditioning input


def test_calibrated_adv_weight_ratios():
    s2p = stage2_preset("sketch2photo").weights
    assert calibrated_adv_weight(s2p, content_total=2.0, adv_value=4.0) == pytest.approx(0.5)
    col = stage2_preset("colorization").weights
    assert calibrated_adv_weight(col, content_total=2.0, adv_value=4.0) == pytest.approx(0.5e-3)


# ---------------------------------------------------------------- run_training

@pytest.fixture(scope="module")
def mini_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("train_photos")
    for i in range(8):
        img = generate_synthetic_photo(100 + i, 160)
        (d / f"p{i}.png").write_bytes(encode_png(img.data))
    return build_manifest(d, "face", val_fraction=0.0, seed=1)


def fast_stage1(epochs=2):
    from dataclasses import replace

    return replace(stage1_preset(), epochs=epochs, batch_size=4, g_learning_rate=1e-3)


def test_run_training_writes_checkpoints_and_metrics(tmp_path, mini_manifest):
    out = tmp_path / "run"
    path = run_training(
        fast_stage1(), mini_manifest, PairParams(), out,
        gen_config=tiny_gen_config(), seed=0,
    )
    assert Path(path).exists()
    assert (out / "epoch_0001.ckpt").exists()
    assert (out / "epoch_0002.ckpt").exists()

    lines = [json.loads(l) for l in (out / "metrics.jsonl").read_text().splitlines()]
    assert lines[0]["event"] == "run_start"
    step_lines = [l for l in lines if "total" in l]
    assert len(step_lines) == 4  # 8 records / batch 4 = 2 steps x 2 epochs
    assert all(math.isfinite(l["total"]) for l in step_lines)

    ckpt = read_checkpoint(path)
    assert ckpt.stage_tag == "content"
    assert ckpt.extra["epoch"] == 2
    # the content stage never allocates a discriminator
    assert not any(name.startswith("discriminator.") for name in ckpt.tensors)
    assert not any(name.startswith("opt_d.") for name in ckpt.tensors)


def test_resume_reproduces_metrics(tmp_path, mini_manifest):
    out_a = tmp_path / "a"
    run_training(fast_stage1(), mini_manifest, PairParams(), out_a, gen_config=tiny_gen_config(), seed=0)
    lines_a = [json.loads(l) for l in (out_a / "metrics.jsonl").read_text().splitlines()]
    epoch1_a = [l for l in lines_a if l.get("epoch") == 1 and "total" in l]

    out_b = tmp_path / "b"
    out_b.mkdir()
    import shutil

    shutil.copy(out_a / "epoch_0001.ckpt", out_b / "epoch_0001.ckpt")
    run_training(
        fast_stage1(), mini_manifest, PairParams(), out_b,
        resume_from=out_b / "epoch_0001.ckpt", seed=0,
    )
    lines_b = [json.loads(l) for l in (out_b / "metrics.jsonl").read_text().splitlines()]
    epoch1_b = [l for l in lines_b if l.get("epoch") == 1 and "total" in l]
    assert len(epoch1_a) == len(epoch1_b) == 2
    for la, lb in zip(epoch1_a, epoch1_b):
        for key in ("l_p", "l_f", "l_tv", "total", "step"):
            assert la[key] == lb[key], key


def test_stage2_requires_stage1_checkpoint(tmp_path, mini_manifest):
    with pytest.raises(ConfigError, match="checkpoint"):
        run_training(stage2_preset("sketch2photo"), mini_manifest, PairParams(), tmp_path / "x")


def test_stage2_runs_from_stage1_checkpoint(tmp_path, mini_manifest):
    from dataclasses import replace

    out1 = tmp_path / "s1"
    ckpt1 = run_training(
        fast_stage1(epochs=1), mini_manifest, PairParams(), out1, gen_config=tiny_gen_config(), seed=0
    )
    cfg2 = replace(stage2_preset("sketch2photo"), epochs=1, batch_size=4,
                   g_learning_rate=1e-4, d_learning_rate=1e-4)
    out2 = tmp_path / "s2"
    ckpt2 = run_training(cfg2, mini_manifest, PairParams(), out2, init_from=ckpt1, seed=0)
    back = read_checkpoint(ckpt2)
    assert back.stage_tag == "adversarial"
    assert any(name.startswith("discriminator.") for name in back.tensors)

    lines = [json.loads(l) for l in (out2 / "metrics.jsonl").read_text().splitlines()]
    start = lines[0]
    # calibration rescaled the huge preset weight to a usable magnitude
    assert 0 < start["weights"]["w_adv"] < 1e4
    steps = [l for l in lines if "d_real_mean" in l]
    assert steps and all(0 < l["d_real_mean"] < 1 for l in steps)


def test_metrics_file_parseable_line_by_line(tmp_path, mini_manifest):
    out = tmp_path / "run"
    run_training(fast_stage1(epochs=1), mini_manifest, PairParams(), out, gen_config=tiny_gen_config(), seed=0)
    raw = (out / "metrics.jsonl").read_text()
    # a torn tail (abrupt termination) must not break earlier lines
    torn = raw + '{"step": 99, "l_p": 0.'
    parsed = []
    for line in torn.splitlines():
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError:
            break
    assert len(parsed) == len(raw.strip().splitlines())
