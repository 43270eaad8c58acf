"""Raster buffers and the pixel-math conventions shared by every pipeline.

Conventions pinned here so golden tests stay portable:

* Buffers are ``float32`` arrays of shape ``(H, W, C)`` with a declared
  value range, usually UNIT ``[0, 1]`` for pipeline images and NET
  ``[-1, 1]`` for anything entering or leaving a network.
* Luma uses ITU-R BT.601 weights (0.299, 0.587, 0.114).
* Bilinear resampling samples at pixel centers with edge clamping:
  the source coordinate of output pixel ``i`` along an axis scaled by
  ``s = in_size / out_size`` is ``(i + 0.5) * s - 0.5``, clamped to
  ``[0, in_size - 1]``, then linearly interpolated between the two
  nearest samples.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ShapeError

UNIT_RANGE = (0.0, 1.0)
NET_RANGE = (-1.0, 1.0)

BT601_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass
class ImageBuffer:
    """H x W x C float raster with a declared value range and channel tag."""

    data: np.ndarray
    value_range: tuple[float, float] = UNIT_RANGE
    channels: str = "rgb"

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError(f"expected (H, W, C) raster, got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr, dtype=np.float32)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]

    def require_channels(self, n: int) -> None:
        if self.n_channels != n:
            raise ShapeError(
                f"expected {n}-channel buffer, got {self.n_channels} channels"
            )

    def converted(self, value_range: tuple[float, float]) -> "ImageBuffer":
        """Affinely remap into another declared range."""
        if value_range == self.value_range:
            return ImageBuffer(self.data.copy(), value_range, self.channels)
        lo, hi = self.value_range
        nlo, nhi = value_range
        scaled = (self.data.astype(np.float64) - lo) / (hi - lo) * (nhi - nlo) + nlo
        return ImageBuffer(scaled.astype(np.float32), value_range, self.channels)

    def clipped(self) -> "ImageBuffer":
        lo, hi = self.value_range
        return ImageBuffer(np.clip(self.data, lo, hi), self.value_range, self.channels)


def unit_to_net(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) * 2.0) - 1.0


def net_to_unit(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) + 1.0) * 0.5


def luma_bt601(rgb: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) array to (H, W) luminance with BT.601 weights."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"luma expects (H, W, 3), got {rgb.shape}")
    return (rgb.astype(np.float64) @ BT601_WEIGHTS).astype(np.float32)


def _axis_weights(in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coords = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    coords = np.clip(coords, 0.0, in_size - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = coords - lo
    return lo, hi, frac


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize (H, W[, C]) with the pixel-center, edge-clamped rule above."""
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    src = arr.astype(np.float64)
    h, w = src.shape[:2]
    ylo, yhi, yf = _axis_weights(h, out_h)
    xlo, xhi, xf = _axis_weights(w, out_w)
    top = src[ylo][:, xlo] * (1 - xf)[None, :, None] + src[ylo][:, xhi] * xf[None, :, None]
    bot = src[yhi][:, xlo] * (1 - xf)[None, :, None] + src[yhi][:, xhi] * xf[None, :, None]
    out = top * (1 - yf)[:, None, None] + bot * yf[:, None, None]
    out = out.astype(np.float32)
    return out[:, :, 0] if squeeze else out


def encode_png(unit_arr: np.ndarray) -> bytes:
    """Encode a [0,1] (H, W) or (H, W, {1,3}) array as 8-bit PNG bytes."""
    arr = np.asarray(unit_arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(q, mode="L" if q.ndim == 2 else "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a [0,1] float32 array, (H, W) for grayscale."""
    img = Image.open(io.BytesIO(data))
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float32) / 255.0


def encode_png_base64(unit_arr: np.ndarray) -> str:
    return base64.b64encode(encode_png(unit_arr)).decode("ascii")


def decode_png_base64(text: str) -> np.ndarray:
    return decode_png(base64.b64decode(text))
