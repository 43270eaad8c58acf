"""Frozen feature extractors for the perceptual loss.

Production uses a pretrained VGG-19 tapped at relu2_2 (one pooling stage in,
so the map is at half resolution). Tests and offline environments use
``TinyFeatureExtractor``, a fixed-seed frozen conv stack with the same
interface and downscale factor, so perceptual-loss behavior can be verified
without downloading pretrained weights.

Extractors take images in the network's [-1, 1] range and adapt internally
to whatever their backbone expects. Their parameters never receive
gradients; gradients still flow to the *input*, which is what the loss
needs.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ConfigError, ShapeError
from ..imagery import ImageBuffer, NET_RANGE

# tap name -> (index into torchvision's vgg19().features, spatial downscale)
VGG19_TAPS = {
    "relu1_2": (3, 1),
    "relu2_1": (6, 2),
    "relu2_2": (8, 2),
    "relu3_2": (13, 4),
}


class FeatureExtractor(nn.Module):
    """Base: a frozen map from [-1, 1] images to an activation tensor."""

    backbone_id: str = "abstract"
    tap_layer: str = ""
    downscale: int = 1
    frozen: bool = True

    def _freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> "FeatureExtractor":
        # Frozen extractors never enter training mode.
        return super().train(False)


class TinyFeatureExtractor(FeatureExtractor):
    """Small fixed-seed conv stack; deterministic stand-in for the VGG tap."""

    backbone_id = "tiny-fixed"
    downscale = 2

    def __init__(self, seed: int = 0, width: int = 8):
        super().__init__()
        self.tap_layer = f"conv2(seed={seed})"
        gen = torch.Generator().manual_seed(seed)
        self.conv1 = nn.Conv2d(3, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, width * 2, 3, stride=2, padding=1)
        with torch.no_grad():
            for conv in (self.conv1, self.conv2):
                nn.init.normal_(conv.weight, std=0.3, generator=gen)
                nn.init.normal_(conv.bias, std=0.1, generator=gen)
        self._freeze()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W), got {tuple(x.shape)}")
        # weights upcast to the input dtype so float64 verification stays exact
        w1, b1 = self.conv1.weight.to(x.dtype), self.conv1.bias.to(x.dtype)
        w2, b2 = self.conv2.weight.to(x.dtype), self.conv2.bias.to(x.dtype)
        h = F.relu(F.conv2d(x, w1, b1, padding=1))
        return F.relu(F.conv2d(h, w2, b2, stride=2, padding=1))


class VggFeatureExtractor(FeatureExtractor):
    """Pretrained VGG-19 tap. ``pretrained=False`` builds the architecture
    only (useful offline; features are then meaningless but shaped right)."""

    backbone_id = "vgg19"

    _MEAN = (0.485, 0.456, 0.406)
    _STD = (0.229, 0.224, 0.225)

    def __init__(self, tap_layer: str = "relu2_2", pretrained: bool = True):
        super().__init__()
        if tap_layer not in VGG19_TAPS:
            raise ConfigError(
                f"unknown tap layer {tap_layer!r}; known: {sorted(VGG19_TAPS)}"
            )
        from torchvision import models

        idx, self.downscale = VGG19_TAPS[tap_layer]
        self.tap_layer = tap_layer
        weights = models.VGG19_Weights.DEFAULT if pretrained else None
        vgg = models.vgg19(weights=weights)
        self.slice = nn.Sequential(*[vgg.features[i] for i in range(idx + 1)])
        mean = torch.tensor(self._MEAN).view(1, 3, 1, 1)
        std = torch.tensor(self._STD).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)
        self._freeze()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W), got {tuple(x.shape)}")
        unit = (x.to(self.mean.dtype) + 1.0) * 0.5
        return self.slice((unit - self.mean) / self.std)


def extract_features(fx: FeatureExtractor, img: ImageBuffer) -> np.ndarray:
    """Run one unit- or net-range buffer through the extractor, returning (C, h, w)."""
    img.require_channels(3)
    net_img = img.converted(NET_RANGE)
    x = torch.from_numpy(net_img.data).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        feats = fx(x)
    return feats[0].numpy().copy()
