"""Color strokes: synthetic sampling from photos, rasterization, compositing.

Coordinate convention: pixel (row i, col j) has center (x=j, y=i); a point
is inside an H x W canvas iff 0 <= x <= W-1 and 0 <= y <= H-1. A stroke is
an opaque round-capped polyline: a pixel is covered iff the distance from
its center to any segment is <= width/2 (a single-point stroke is a disk).
Later strokes paint over earlier ones.

Stroke colors are RGB in [0, 1], the same convention as the JSON wire
schema ``{"strokes": [{"points": [[x, y], ...], "color": [r, g, b],
"width": w}]}`` that the UI submits, so training-time and user-time strokes
are interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, StrokeError
from .imagery import ImageBuffer, UNIT_RANGE


@dataclass
class ColorStroke:
    points: np.ndarray  # (N, 2) float64, columns (x, y)
    color: tuple[float, float, float]
    width: float

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise StrokeError(f"stroke needs an (N, 2) point list, got shape {pts.shape}")
        if self.width < 1:
            raise StrokeError(f"stroke width must be >= 1, got {self.width}")
        self.points = pts
        self.color = tuple(float(c) for c in self.color)

    def to_json_dict(self) -> dict:
        return {
            "points": [[float(x), float(y)] for x, y in self.points],
            "color": list(self.color),
            "width": float(self.width),
        }


@dataclass
class StrokeSet:
    strokes: list[ColorStroke] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.strokes)

    def __iter__(self):
        return iter(self.strokes)

    def to_json_dict(self) -> dict:
        return {"strokes": [s.to_json_dict() for s in self.strokes]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "StrokeSet":
        strokes = []
        for i, s in enumerate(d.get("strokes", [])):
            try:
                strokes.append(
                    ColorStroke(
                        points=np.asarray(s["points"], dtype=np.float64),
                        color=tuple(s["color"]),
                        width=float(s["width"]),
                    )
                )
            except (KeyError, TypeError, ValueError, StrokeError) as exc:
                raise StrokeError(f"malformed stroke: {exc}", stroke_index=i) from exc
        return cls(strokes)


@dataclass(frozen=True)
class StrokeSamplerParams:
    blur_sigma: float = 4.0
    n_strokes_range: tuple[int, int] = (1, 8)
    max_length: float = 48.0
    width_range: tuple[float, float] = (2.0, 5.0)
    color_restart_threshold: float = 0.15  # Euclidean distance in RGB [0,1]^3
    step_size: float = 2.0
    heading_jitter: float = 0.4  # radians per step

    def __post_init__(self) -> None:
        positive = {
            "blur_sigma": self.blur_sigma,
            "max_length": self.max_length,
            "color_restart_threshold": self.color_restart_threshold,
            "step_size": self.step_size,
        }
        for name, v in positive.items():
            if not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.n_strokes_range[0] < 0 or self.n_strokes_range[0] > self.n_strokes_range[1]:
            raise ConfigError(f"bad n_strokes_range {self.n_strokes_range}")
        if self.width_range[0] < 1 or self.width_range[0] > self.width_range[1]:
            raise ConfigError(f"bad width_range {self.width_range}")


def blur_for_sampling(gt: ImageBuffer, sigma: float) -> np.ndarray:
    """The exact blurred image the sampler reads colors from (float64 HxWx3)."""
    return gaussian_filter(
        gt.data.astype(np.float64), sigma=(sigma, sigma, 0), mode="nearest"
    )


def _nearest_pixel(blurred: np.ndarray, x: float, y: float) -> np.ndarray:
    return blurred[int(round(y)), int(round(x))]


def sample_color_strokes(
    gt: ImageBuffer, p: StrokeSamplerParams, rng: np.random.Generator
) -> StrokeSet:
    """Sample scribble-like strokes whose colors come from the blurred photo.

    Each stroke starts at a uniform position, takes the blurred color under
    its start point, and grows as a momentum random walk (heading perturbed
    each step). Growth stops at ``max_length``, at the canvas edge, or when
    the blurred color under the head drifts more than the restart threshold
    from the stroke color; in that case the *next* stroke begins at that
    head with its color (restarts consume the stroke budget).
    """
    gt.require_channels(3)
    unit = gt.converted(UNIT_RANGE)
    h, w = unit.height, unit.width
    blurred = blur_for_sampling(unit, p.blur_sigma)

    n = int(rng.integers(p.n_strokes_range[0], p.n_strokes_range[1] + 1))
    strokes: list[ColorStroke] = []
    pending: tuple[tuple[float, float], np.ndarray] | None = None
    max_steps = int(math.ceil(p.max_length / p.step_size))

    for _ in range(n):
        if pending is not None:
            (x, y), color = pending
            pending = None
        else:
            x = float(rng.uniform(0, w - 1))
            y = float(rng.uniform(0, h - 1))
            color = _nearest_pixel(blurred, x, y)
        width = float(rng.uniform(*p.width_range))
        heading = float(rng.uniform(0, 2 * math.pi))
        points = [(x, y)]
        for _ in range(max_steps):
            heading += float(rng.normal(0.0, p.heading_jitter))
            nx = x + p.step_size * math.cos(heading)
            ny = y + p.step_size * math.sin(heading)
            if not (0 <= nx <= w - 1 and 0 <= ny <= h - 1):
                break
            head_color = _nearest_pixel(blurred, nx, ny)
            if float(np.linalg.norm(head_color - color)) > p.color_restart_threshold:
                pending = ((nx, ny), head_color)
                break
            points.append((nx, ny))
            x, y = nx, ny
        strokes.append(
            ColorStroke(np.array(points, dtype=np.float64), tuple(color.tolist()), width)
        )
    return StrokeSet(strokes)


def _segment_coverage(mask: np.ndarray, a: np.ndarray, b: np.ndarray, width: float) -> None:
    """OR capsule coverage of segment a->b into the boolean mask."""
    h, w = mask.shape
    r = width / 2.0
    x0 = max(int(math.floor(min(a[0], b[0]) - r - 1)), 0)
    x1 = min(int(math.ceil(max(a[0], b[0]) + r + 1)), w - 1)
    y0 = max(int(math.floor(min(a[1], b[1]) - r - 1)), 0)
    y1 = min(int(math.ceil(max(a[1], b[1]) + r + 1)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    px = xs.astype(np.float64)
    py = ys.astype(np.float64)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        d2 = (px - a[0]) ** 2 + (py - a[1]) ** 2
    else:
        t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
        d2 = (px - (a[0] + t * ab[0])) ** 2 + (py - (a[1] + t * ab[1])) ** 2
    mask[y0 : y1 + 1, x0 : x1 + 1] |= d2 <= r * r


def stroke_coverage(size: tuple[int, int], stroke: ColorStroke) -> np.ndarray:
    """Boolean coverage of one stroke on an (H, W) canvas."""
    mask = np.zeros(size, dtype=bool)
    pts = stroke.points
    if len(pts) == 1:
        _segment_coverage(mask, pts[0], pts[0], stroke.width)
    else:
        for i in range(len(pts) - 1):
            _segment_coverage(mask, pts[i], pts[i + 1], stroke.width)
    return mask


def segments_coverage(
    size: tuple[int, int],
    segments: list[tuple[tuple[float, float], tuple[float, float]]],
    widths: list[float],
) -> np.ndarray:
    """Coverage of bare segments; no bounds validation (internal helper)."""
    mask = np.zeros(size, dtype=bool)
    for (a, b), width in zip(segments, widths):
        _segment_coverage(mask, np.asarray(a, float), np.asarray(b, float), width)
    return mask


def _validate_strokes(strokes: StrokeSet, h: int, w: int) -> None:
    for i, s in enumerate(strokes):
        x, y = s.points[:, 0], s.points[:, 1]
        if (x < 0).any() or (x > w - 1).any() or (y < 0).any() or (y > h - 1).any():
            raise StrokeError(
                f"stroke {i} has points outside the {h}x{w} canvas", stroke_index=i
            )


def rasterize_strokes(
    strokes: StrokeSet,
    size: tuple[int, int],
    background: ImageBuffer | tuple[float, float, float],
) -> tuple[ImageBuffer, np.ndarray]:
    """Paint strokes (painter's order) over a unit-range background.

    Returns the painted 3-channel buffer and the boolean coverage mask.
    Out-of-bounds strokes are rejected with their index.
    """
    h, w = size
    _validate_strokes(strokes, h, w)
    if isinstance(background, ImageBuffer):
        background.require_channels(3)
        if (background.height, background.width) != (h, w):
            raise StrokeError(
                f"background {background.height}x{background.width} != canvas {h}x{w}"
            )
        canvas = background.converted(UNIT_RANGE).data.copy()
    else:
        canvas = np.empty((h, w, 3), dtype=np.float32)
        canvas[:] = np.asarray(background, dtype=np.float32)
    mask = np.zeros((h, w), dtype=bool)
    for stroke in strokes:
        cov = stroke_coverage((h, w), stroke)
        canvas[cov] = np.asarray(stroke.color, dtype=np.float32)
        mask |= cov
    return ImageBuffer(canvas, UNIT_RANGE, "rgb"), mask


def compose_sketch_input(sketch: ImageBuffer, strokes: StrokeSet) -> ImageBuffer:
    """3-channel sketch with color strokes painted on top."""
    sketch.require_channels(1)
    rgb = np.repeat(sketch.converted(UNIT_RANGE).data, 3, axis=2)
    base = ImageBuffer(rgb, UNIT_RANGE, "rgb")
    painted, _ = rasterize_strokes(strokes, (sketch.height, sketch.width), base)
    return painted


# Unit-range value whose network-range image is 0 (mid-gray "no stroke" sentinel).
NEUTRAL_STROKE_VALUE = 0.5


def compose_colorization_input(gray: ImageBuffer, strokes: StrokeSet) -> ImageBuffer:
    """4-channel colorization input: luma plus a stroke raster.

    Channel 0 carries the grayscale image unchanged; channels 1-3 hold the
    stroke raster over the neutral sentinel (0.5 in unit range, i.e. 0 once
    mapped to the network's [-1, 1] domain). No explicit mask channel is fed
    to the network.
    """
    gray.require_channels(1)
    h, w = gray.height, gray.width
    raster, _ = rasterize_strokes(
        strokes, (h, w), (NEUTRAL_STROKE_VALUE,) * 3
    )
    out = np.concatenate([gray.converted(UNIT_RANGE).data, raster.data], axis=2)
    return ImageBuffer(out, UNIT_RANGE, "luma+strokes")
