"""Synthetic line-drawing operators and the training augmentations.

All operators consume a unit-range RGB photo (luma via BT.601) and emit a
single-channel sketch in [0, 1] with value 1 = white background and dark
values along luminance boundaries. Constant inputs give a blank (all-white)
page because the difference-of-Gaussians response of a constant is zero.

Extended DoG formula used here (parameters in ``XdogParams``):

    d(x)      = G_sigma(gray)(x) - G_{k*sigma}(gray)(x)
    r(x)      = s * d(x),  s = tau / (1 - tau)          (sharpening gain)
    sketch(x) = 1                          if r(x) >= -epsilon
              = 1 + tanh(phi * (r(x) + epsilon))        otherwise

``sigma`` is measured in pixels at the processed resolution; the dataset
pipeline runs sketch synthesis at the category's resize resolution so line
weight stays consistent. Gaussians use edge-clamped ("nearest") borders.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DomainError
from .imagery import ImageBuffer, UNIT_RANGE, bilinear_resize, luma_bt601
from .strokes import segments_coverage

logger = logging.getLogger(__name__)

DODGE_GUARD = 1e-3

# category -> square resize target applied before the random 128 crop
RESIZE_TARGETS = {"face": 256, "bedroom": 256, "car": 170}
CROP_SIZE = 128


@dataclass(frozen=True)
class XdogParams:
    sigma: float = 0.5
    k: float = 1.6
    tau: float = 0.98
    epsilon: float = 0.1
    phi: float = 10.0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.k <= 1:
            raise ConfigError(f"k must be > 1, got {self.k}")
        if not 0 < self.tau < 1:
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class CutoffParams:
    max_strokes: int = 8
    width_range: tuple[float, float] = (1.0, 4.0)
    length_range: tuple[float, float] = (8.0, 48.0)

    def __post_init__(self) -> None:
        if self.max_strokes < 0:
            raise ConfigError("max_strokes must be >= 0")
        for name, (lo, hi) in (("width_range", self.width_range), ("length_range", self.length_range)):
            if lo < 0 or lo > hi:
                raise ConfigError(f"bad {name}: ({lo}, {hi})")


@dataclass(frozen=True)
class SketchParams:
    style: str = "xdog_default"
    xdog: XdogParams = field(default_factory=XdogParams)
    dodge_sigma: float = 8.0
    brightness_range: tuple[float, float] = (0.3, 1.2)
    cutoff: CutoffParams = field(default_factory=CutoffParams)

    def __post_init__(self) -> None:
        if self.dodge_sigma <= 0:
            raise ConfigError("dodge_sigma must be positive")
        lo, hi = self.brightness_range
        if lo < 0 or lo > hi:
            raise ConfigError(f"bad brightness_range: ({lo}, {hi})")


SKETCH_STYLES: dict[str, SketchParams] = {
    "xdog_default": SketchParams(style="xdog_default"),
    "xdog_soft": SketchParams(style="xdog_soft", xdog=XdogParams(tau=0.95, phi=5.0)),
    "xdog_heavy": SketchParams(
        style="xdog_heavy", xdog=XdogParams(sigma=1.0, tau=0.995, phi=30.0)
    ),
    "dodge": SketchParams(style="dodge"),
}


@dataclass
class AugmentedPair:
    input_sketch: ImageBuffer
    target_photo: ImageBuffer
    crop_origin: tuple[int, int]  # (row, col) into the resized sources
    applied_brightness: float | None = None
    cutoff_strokes_used: int = 0


def _gray(photo: ImageBuffer) -> np.ndarray:
    photo.require_channels(3)
    return luma_bt601(photo.converted(UNIT_RANGE).data).astype(np.float64)


def xdog_sketch(photo: ImageBuffer, p: SketchParams) -> ImageBuffer:
    """Extended difference-of-Gaussians line drawing (formula above)."""
    xp = p.xdog
    gray = _gray(photo)
    g1 = gaussian_filter(gray, xp.sigma, mode="nearest")
    g2 = gaussian_filter(gray, xp.k * xp.sigma, mode="nearest")
    r = (xp.tau / (1.0 - xp.tau)) * (g1 - g2)
    out = np.where(r >= -xp.epsilon, 1.0, 1.0 + np.tanh(xp.phi * (r + xp.epsilon)))
    return ImageBuffer(np.clip(out, 0.0, 1.0).astype(np.float32), UNIT_RANGE, "sketch")


def dodge_sketch(photo: ImageBuffer, p: SketchParams) -> ImageBuffer:
    """Color-dodge line drawing: gray over blurred inverted gray.

    out = clamp(gray / max(1 - blur(1 - gray), guard), 0, 1); the guard keeps
    pure-dark regions finite.
    """
    gray = _gray(photo)
    base = 1.0 - gaussian_filter(1.0 - gray, p.dodge_sigma, mode="nearest")
    out = np.clip(gray / np.maximum(base, DODGE_GUARD), 0.0, 1.0)
    return ImageBuffer(out.astype(np.float32), UNIT_RANGE, "sketch")


def synthesize_sketch(photo: ImageBuffer, p: SketchParams) -> ImageBuffer:
    if p.style == "dodge":
        return dodge_sketch(photo, p)
    if p.style.startswith("xdog"):
        return xdog_sketch(photo, p)
    raise ConfigError(f"unknown sketch style {p.style!r}")


def resize_for_category(img: ImageBuffer, category: str) -> ImageBuffer:
    if category not in RESIZE_TARGETS:
        raise ConfigError(f"unknown category {category!r}; know {sorted(RESIZE_TARGETS)}")
    target = RESIZE_TARGETS[category]
    if (img.height, img.width) == (target, target):
        return img
    if img.height < target or img.width < target:
        logger.info(
            "upscaling %dx%d source to %dx%d with the bilinear rule",
            img.height, img.width, target, target,
        )
    return ImageBuffer(bilinear_resize(img.data, target, target), UNIT_RANGE, img.channels)


def resize_and_random_crop(
    photo: ImageBuffer, sketch: ImageBuffer, category: str, rng: np.random.Generator
) -> AugmentedPair:
    """Resize an aligned (photo, sketch) pair per category, crop 128 together.

    The crop origin is uniform over all valid positions and recorded so the
    crop can be reproduced bit-exactly from the resized sources.
    """
    if (photo.height, photo.width) != (sketch.height, sketch.width):
        raise ConfigError(
            f"photo {photo.height}x{photo.width} and sketch "
            f"{sketch.height}x{sketch.width} are not aligned"
        )
    photo_r = resize_for_category(photo, category)
    sketch_r = resize_for_category(sketch, category)
    limit = RESIZE_TARGETS[category] - CROP_SIZE
    oy = int(rng.integers(0, limit + 1))
    ox = int(rng.integers(0, limit + 1))
    return AugmentedPair(
        input_sketch=crop(sketch_r, (oy, ox)),
        target_photo=crop(photo_r, (oy, ox)),
        crop_origin=(oy, ox),
    )


def crop(img: ImageBuffer, origin: tuple[int, int], size: int = CROP_SIZE) -> ImageBuffer:
    oy, ox = origin
    if oy < 0 or ox < 0 or oy + size > img.height or ox + size > img.width:
        raise ConfigError(f"crop origin {origin} out of range for {img.height}x{img.width}")
    return ImageBuffer(img.data[oy : oy + size, ox : ox + size].copy(), img.value_range, img.channels)


def brightness_jitter(sketch: ImageBuffer, factor: float) -> ImageBuffer:
    """Scale line darkness: out = clamp(1 - factor * (1 - in), 0, 1).

    factor 1 is the identity; factor 0 erases every line (all-white); the
    white background is a fixed point for any factor.
    """
    if factor < 0:
        raise DomainError(f"brightness factor must be >= 0, got {factor}")
    sketch.require_channels(1)
    data = sketch.converted(UNIT_RANGE).data
    out = np.clip(1.0 - factor * (1.0 - data.astype(np.float64)), 0.0, 1.0)
    return ImageBuffer(out.astype(np.float32), UNIT_RANGE, "sketch")


def cutoff_augment(
    sketch: ImageBuffer, rng: np.random.Generator, cutoff: CutoffParams
) -> tuple[ImageBuffer, int]:
    """Erase random line fragments by max-compositing white strokes.

    Returns the augmented sketch and the number of strokes drawn. Output is
    pointwise >= the input.
    """
    sketch.require_channels(1)
    h, w = sketch.height, sketch.width
    k = int(rng.integers(0, cutoff.max_strokes + 1))
    segments, widths = [], []
    for _ in range(k):
        x0 = float(rng.uniform(0, w - 1))
        y0 = float(rng.uniform(0, h - 1))
        angle = float(rng.uniform(0, 2 * math.pi))
        length = float(rng.uniform(*cutoff.length_range))
        width = float(rng.uniform(*cutoff.width_range))
        segments.append(((x0, y0), (x0 + length * math.cos(angle), y0 + length * math.sin(angle))))
        widths.append(width)
    if not segments:
        return ImageBuffer(sketch.data.copy(), UNIT_RANGE, "sketch"), 0
    cov = segments_coverage((h, w), segments, widths)
    out = np.maximum(sketch.converted(UNIT_RANGE).data[:, :, 0], cov.astype(np.float32))
    return ImageBuffer(out, UNIT_RANGE, "sketch"), k
