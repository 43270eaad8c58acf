"""Weak unconditional discriminator: a shallow fully convolutional scorer.

Four stride-2 convs with LeakyReLU (no normalization layers, no fully
connected layers) end in a 1-channel logit map. Per-image realism is the
spatial mean of the sigmoid-squashed map, so it always lies in (0, 1).
The discriminator only ever sees candidate images, never the conditioning
input.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ConfigError, ShapeError

_N_DOWN = 4


class DiscriminatorNetwork(nn.Module):
    def __init__(self, input_resolution: int, in_channels: int = 3, base_width: int = 32):
        super().__init__()
        if input_resolution < 2**_N_DOWN:
            raise ConfigError(
                f"input resolution {input_resolution} below the receptive-field "
                f"minimum of {2 ** _N_DOWN}"
            )
        self.input_resolution = input_resolution
        self.in_channels = in_channels
        widths = [base_width * 2**i for i in range(_N_DOWN)]
        convs = []
        prev = in_channels
        for w in widths:
            convs.append(nn.Conv2d(prev, w, 4, stride=2, padding=1))
            prev = w
        self.convs = nn.ModuleList(convs)
        self.score_conv = nn.Conv2d(prev, 1, 3, padding=1)
        self.receptive_field = self._receptive_field()

    @staticmethod
    def _receptive_field() -> int:
        rf, jump = 1, 1
        for _ in range(_N_DOWN):
            rf += (4 - 1) * jump
            jump *= 2
        rf += (3 - 1) * jump
        return rf

    @property
    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def _validate(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"expected (B, {self.in_channels}, H, W) input, got {tuple(x.shape)}"
            )
        if min(x.shape[2], x.shape[3]) < 2**_N_DOWN:
            raise ShapeError(f"input smaller than minimum size {2 ** _N_DOWN}")

    def score_map(self, x: torch.Tensor) -> torch.Tensor:
        """Per-location scores squashed into (0, 1), shape (B, 1, h, w)."""
        self._validate(x)
        h = x
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.2)
        return torch.sigmoid(self.score_conv(h))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Scalar realism score per image: spatial mean of the score map."""
        return self.score_map(x).mean(dim=(1, 2, 3))


def build_discriminator(
    input_resolution: int, in_channels: int = 3, base_width: int = 32, seed: int | None = None
) -> DiscriminatorNetwork:
    if seed is not None:
        torch.manual_seed(seed)
    return DiscriminatorNetwork(input_resolution, in_channels, base_width)
