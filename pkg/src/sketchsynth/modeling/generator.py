"""Encoder-decoder generator with residual bottleneck and bilinear upsampling.

Layout: a stem conv, ``n_down`` stride-2 convs (widths doubling, the last
one jumping to ``bottleneck_width``), ``n_bottleneck_res`` stride-1
residual blocks, then ``n_up`` stages of bilinear 2x upsampling, a width-
halving conv and two residual blocks each, and a final conv squashed with
tanh into ``output_range``. There are no transposed convolutions: upsampling
is pure bilinear interpolation, so a spatially constant activation map stays
constant through the whole decoder (no checkerboard pattern can originate
from the architecture itself).

Default widths (base 32, bottleneck 224) put the parameter count at
7,803,171.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ConfigError, ShapeError
from ..imagery import NET_RANGE, ImageBuffer, net_to_unit, unit_to_net


@dataclass(frozen=True)
class GeneratorConfig:
    input_channels: int = 3
    base_width: int = 32
    bottleneck_width: int = 224
    n_down: int = 3
    n_bottleneck_res: int = 7
    n_up: int = 3
    output_channels: int = 3
    output_range: tuple[float, float] = NET_RANGE

    def __post_init__(self) -> None:
        if self.n_down != self.n_up:
            raise ConfigError(f"n_down ({self.n_down}) must equal n_up ({self.n_up})")
        if self.n_bottleneck_res < 1:
            raise ConfigError("n_bottleneck_res must be >= 1")
        if min(self.base_width, self.bottleneck_width) < 1:
            raise ConfigError("channel widths must be positive")
        if self.input_channels < 1 or self.output_channels < 1:
            raise ConfigError("channel counts must be positive")

    @property
    def divisor(self) -> int:
        """Input spatial dims must be divisible by this."""
        return 2**self.n_down

    def down_widths(self) -> list[int]:
        widths = [self.base_width * 2 ** (i + 1) for i in range(self.n_down - 1)]
        return widths + [self.bottleneck_width]

    def up_widths(self) -> list[int]:
        return [self.base_width * 2 ** (self.n_up - 1 - i) for i in range(self.n_up)]

    def to_dict(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "base_width": self.base_width,
            "bottleneck_width": self.bottleneck_width,
            "n_down": self.n_down,
            "n_bottleneck_res": self.n_bottleneck_res,
            "n_up": self.n_up,
            "output_channels": self.output_channels,
            "output_range": list(self.output_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "output_range" in d:
            d["output_range"] = tuple(d["output_range"])
        return cls(**d)


class ResidualBlock(nn.Module):
    """conv-relu-conv with an identity skip; second conv damped at init."""

    def __init__(self, width: int):
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, width, 3, padding=1)
        with torch.no_grad():
            self.conv2.weight.mul_(0.1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(F.relu(self.conv1(x)))


class GeneratorNetwork(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.stem = nn.Conv2d(config.input_channels, w, 3, padding=1)

        downs = []
        in_w = w
        for out_w in config.down_widths():
            downs.append(nn.Conv2d(in_w, out_w, 3, stride=2, padding=1))
            in_w = out_w
        self.downs = nn.ModuleList(downs)

        self.bottleneck = nn.Sequential(
            *[ResidualBlock(config.bottleneck_width) for _ in range(config.n_bottleneck_res)]
        )

        up_convs, up_blocks = [], []
        for out_w in config.up_widths():
            up_convs.append(nn.Conv2d(in_w, out_w, 3, padding=1))
            up_blocks.append(nn.Sequential(ResidualBlock(out_w), ResidualBlock(out_w)))
            in_w = out_w
        self.up_convs = nn.ModuleList(up_convs)
        self.up_blocks = nn.ModuleList(up_blocks)

        self.head = nn.Conv2d(in_w, config.output_channels, 3, padding=1)

    @property
    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def validate_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4:
            raise ShapeError(f"expected (B, C, H, W) input, got shape {tuple(x.shape)}")
        b, c, h, w = x.shape
        if c != self.config.input_channels:
            raise ShapeError(
                f"expected {self.config.input_channels} input channels, got {c}"
            )
        d = self.config.divisor
        if h % d or w % d:
            raise ShapeError(f"spatial dims ({h}, {w}) must be divisible by {d}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.validate_input(x)
        h = F.relu(self.stem(x))
        for down in self.downs:
            h = F.relu(down(h))
        h = self.bottleneck(h)
        for conv, blocks in zip(self.up_convs, self.up_blocks):
            h = F.interpolate(h, scale_factor=2, mode="bilinear", align_corners=False)
            h = F.relu(conv(h))
            h = blocks(h)
        return torch.tanh(self.head(h))


def build_generator(config: GeneratorConfig, seed: int | None = None) -> GeneratorNetwork:
    """Construct a generator; a seed makes the initial weights reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return GeneratorNetwork(config)


def forward_generator(net: GeneratorNetwork, batch: list[ImageBuffer]) -> list[ImageBuffer]:
    """Inference-mode forward over a batch of unit-range buffers.

    Buffers are converted to the network's [-1, 1] domain, run in one batch,
    and returned as unit-range buffers in the original order.
    """
    if not batch:
        return []
    shapes = {(b.height, b.width, b.n_channels) for b in batch}
    if len(shapes) != 1:
        raise ShapeError(f"batch members must share one shape, got {sorted(shapes)}")
    x = torch.from_numpy(
        unit_to_net(
            torch.stack([torch.from_numpy(b.data) for b in batch]).numpy()
        )
    ).permute(0, 3, 1, 2)
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            y = net(x)
    finally:
        net.train(was_training)
    out = net_to_unit(y.permute(0, 2, 3, 1).numpy())
    return [ImageBuffer(out[i], channels="rgb") for i in range(out.shape[0])]
