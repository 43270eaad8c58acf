import numpy as np
import pytest
import torch

from sketchsynth.errors import ConfigError
from sketchsynth.imagery import ImageBuffer
from sketchsynth.modeling.features import (
    VGG19_TAPS,
    TinyFeatureExtractor,
    VggFeatureExtractor,
    extract_features,
)


def test_repeat_calls_bitwise_identical(tiny_fx):
    img = ImageBuffer(np.random.default_rng(0).uniform(0, 1, (16, 16, 3)).astype(np.float32))
    a = extract_features(tiny_fx, img)
    b = extract_features(tiny_fx, img)
    assert np.array_equal(a, b)


def test_feature_continuity(tiny_fx):
    rng = np.random.default_rng(1)
    base = rng.uniform(0.2, 0.8, (16, 16, 3)).astype(np.float32)
    f0 = extract_features(tiny_fx, ImageBuffer(base))
    norms = []
    for eps in (1e-2, 1e-3, 1e-4):
        f1 = extract_features(tiny_fx, ImageBuffer(base + eps))
        norms.append(np.linalg.norm(f1 - f0))
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 1e-2


def test_tiny_extractor_downscale_matches_metadata(tiny_fx):
    img = ImageBuffer(np.zeros((32, 32, 3), np.float32))
    feats = extract_features(tiny_fx, img)
    assert feats.shape[1:] == (32 // tiny_fx.downscale, 32 // tiny_fx.downscale)


def test_vgg_tap_downscale_matches_architecture_table():
    # architecture only, no pretrained download
    fx = VggFeatureExtractor(tap_layer="relu2_2", pretrained=False)
    assert fx.downscale == 2
    pools = [m for m in fx.slice if isinstance(m, torch.nn.MaxPool2d)]
    assert len(pools) == 1  # one pooling stage before the tap halves H and W once
    with torch.no_grad():
        out = fx(torch.zeros(1, 3, 64, 64))
    assert out.shape[2:] == (32, 32)
    assert out.shape[1] == 128  # vgg19 conv2_x width


def test_unknown_tap_layer_rejected():
    with pytest.raises(ConfigError):
        VggFeatureExtractor(tap_layer="relu9_9", pretrained=False)


def test_extractor_is_frozen_but_grads_flow_to_input(tiny_fx):
    assert all(not p.requires_grad for p in tiny_fx.parameters())
    x = torch.rand(1, 3, 8, 8, requires_grad=True)
    tiny_fx(x).sum().backward()
    assert x.grad is not None
    assert float(x.grad.abs().sum()) > 0
    # .train() must not unfreeze it
    tiny_fx.train()
    assert not tiny_fx.training


def test_tap_registry_consistency():
    for name, (idx, scale) in VGG19_TAPS.items():
        assert idx > 0 and scale in (1, 2, 4)
