"""Manifests, deterministic splits, and mode-specific training-pair assembly.

Pair assembly is a pure function of (record, mode, params, seed): every
random choice comes from a generator seeded by a stable hash of those
inputs, so dataset workers can run in parallel and reruns are bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .imagery import ImageBuffer, UNIT_RANGE, decode_png, luma_bt601, unit_to_net
from .sketch import (
    CROP_SIZE,
    SKETCH_STYLES,
    AugmentedPair,
    SketchParams,
    brightness_jitter,
    crop,
    cutoff_augment,
    resize_and_random_crop,
    resize_for_category,
    synthesize_sketch,
)
from .strokes import StrokeSamplerParams, StrokeSet, compose_colorization_input, compose_sketch_input, sample_color_strokes

MODES = ("sketch2photo", "sketch_strokes", "colorization")
PHOTO_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass
class ManifestRecord:
    id: str
    photo_path: str
    split: str
    external_sketch_path: str | None = None


@dataclass
class Manifest:
    category: str
    seed: int
    records: list[ManifestRecord] = field(default_factory=list)

    def split_records(self, split: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == split]


def stable_hash(*parts) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def build_manifest(
    root_dir: str | os.PathLike, category: str, val_fraction: float = 0.1, seed: int = 0
) -> Manifest:
    """Scan a photo directory into a manifest with a deterministic split.

    Records are ranked by hash(id, seed); the lowest round(val_fraction * n)
    become validation, so the split is both reproducible and exact. A
    directory already following the split convention (root/train/*.png,
    root/val/*.png) keeps its splits verbatim and ignores val_fraction.
    """
    root = Path(root_dir)
    if (root / "train").is_dir():
        return _manifest_from_split_dirs(root, category, seed)
    paths = sorted(
        p for p in root.rglob("*") if p.suffix.lower() in PHOTO_EXTENSIONS and p.is_file()
    )
    if not paths:
        raise ConfigError(f"no photos found under {root}")
    seen: dict[str, Path] = {}
    duplicates = []
    for p in paths:
        if p.stem in seen:
            duplicates.append(p.stem)
        seen[p.stem] = p
    if duplicates:
        raise ConfigError(f"duplicate photo ids: {sorted(set(duplicates))}")
    if not 0 <= val_fraction <= 1:
        raise ConfigError(f"val_fraction must be in [0, 1], got {val_fraction}")
    ranked = sorted(paths, key=lambda p: stable_hash("split", p.stem, seed))
    n_val = int(round(val_fraction * len(paths)))
    val_ids = {p.stem for p in ranked[:n_val]}
    records = [
        ManifestRecord(
            id=p.stem,
            photo_path=str(p),
            split="val" if p.stem in val_ids else "train",
        )
        for p in paths
    ]
    return Manifest(category=category, seed=seed, records=records)


def _manifest_from_split_dirs(root: Path, category: str, seed: int) -> Manifest:
    records = []
    seen: set[str] = set()
    duplicates = []
    for split in ("train", "val"):
        subdir = root / split
        if not subdir.is_dir():
            continue
        for p in sorted(
            x for x in subdir.rglob("*") if x.suffix.lower() in PHOTO_EXTENSIONS and x.is_file()
        ):
            if p.stem in seen:
                duplicates.append(p.stem)
            seen.add(p.stem)
            records.append(ManifestRecord(id=p.stem, photo_path=str(p), split=split))
    if duplicates:
        raise ConfigError(f"duplicate photo ids: {sorted(set(duplicates))}")
    if not records:
        raise ConfigError(f"no photos found under {root}/(train|val)")
    return Manifest(category=category, seed=seed, records=records)


def save_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    """One JSON object per line: a header line, then one line per record."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            json.dumps(
                {"type": "header", "category": manifest.category, "seed": manifest.seed}
            )
            + "\n"
        )
        for r in manifest.records:
            f.write(
                json.dumps(
                    {
                        "type": "record",
                        "id": r.id,
                        "photo_path": r.photo_path,
                        "split": r.split,
                        "external_sketch_path": r.external_sketch_path,
                    }
                )
                + "\n"
            )


def load_manifest(path: str | os.PathLike, check_paths: bool = True) -> Manifest:
    with open(path, encoding="utf-8") as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ConfigError(f"{path} is not a manifest (missing header line)")
    header = lines[0]
    records = []
    ids = set()
    for obj in lines[1:]:
        rec = ManifestRecord(
            id=obj["id"],
            photo_path=obj["photo_path"],
            split=obj["split"],
            external_sketch_path=obj.get("external_sketch_path"),
        )
        if rec.split not in ("train", "val"):
            raise ConfigError(f"record {rec.id}: bad split {rec.split!r}")
        if rec.id in ids:
            raise ConfigError(f"duplicate record id {rec.id!r}")
        ids.add(rec.id)
        if check_paths and not os.path.exists(rec.photo_path):
            raise ConfigError(f"record {rec.id}: missing photo {rec.photo_path}")
        records.append(rec)
    return Manifest(category=header["category"], seed=header["seed"], records=records)


@dataclass(frozen=True)
class PairParams:
    """Everything make_training_pair needs besides the record itself."""

    category: str = "face"
    style_weights: tuple[tuple[str, float], ...] = (("xdog_default", 1.0),)
    stroke: StrokeSamplerParams = field(default_factory=StrokeSamplerParams)
    apply_brightness: bool = True
    apply_cutoff: bool = True
    external_mirror: bool = True
    external_max_rotation: float = 15.0  # degrees

    def __post_init__(self) -> None:
        for style, weight in self.style_weights:
            if style not in SKETCH_STYLES:
                raise ConfigError(f"unknown sketch style {style!r}")
            if weight < 0:
                raise ConfigError("style weights must be >= 0")
        if not any(w > 0 for _, w in self.style_weights):
            raise ConfigError("at least one style weight must be positive")


MULTI_STYLE_WEIGHTS = (
    ("xdog_default", 1.0),
    ("xdog_soft", 1.0),
    ("xdog_heavy", 1.0),
    ("dodge", 1.0),
)


@dataclass
class TrainingPair:
    input: ImageBuffer
    target: ImageBuffer
    mode: str
    provenance: dict


def load_photo(record: ManifestRecord) -> ImageBuffer:
    with open(record.photo_path, "rb") as f:
        arr = decode_png(f.read())
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return ImageBuffer(arr, UNIT_RANGE, "rgb")


def _draw_style(params: PairParams, rng: np.random.Generator) -> SketchParams:
    names = [s for s, _ in params.style_weights]
    weights = np.array([w for _, w in params.style_weights], dtype=np.float64)
    idx = int(rng.choice(len(names), p=weights / weights.sum()))
    return SKETCH_STYLES[names[idx]]


def _augment_external(
    photo: ImageBuffer, sketch: ImageBuffer, params: PairParams, rng: np.random.Generator
) -> tuple[ImageBuffer, ImageBuffer]:
    """Mirror/rotate hand-drawn pairs together (hand-drawn data is scarce)."""
    p_arr, s_arr = photo.data, sketch.data
    if params.external_mirror and rng.integers(0, 2) == 1:
        p_arr = p_arr[:, ::-1].copy()
        s_arr = s_arr[:, ::-1].copy()
    angle = float(rng.uniform(-params.external_max_rotation, params.external_max_rotation))
    p_arr = ndimage.rotate(p_arr, angle, axes=(1, 0), reshape=False, order=1, mode="nearest")
    s_arr = ndimage.rotate(s_arr, angle, axes=(1, 0), reshape=False, order=1, mode="constant", cval=1.0)
    return (
        ImageBuffer(np.clip(p_arr, 0, 1), UNIT_RANGE, "rgb"),
        ImageBuffer(np.clip(s_arr, 0, 1), UNIT_RANGE, "sketch"),
    )


def make_training_pair(
    record: ManifestRecord, mode: str, params: PairParams, seed: int
) -> TrainingPair:
    """Assemble one (input, target) pair for the given mode.

    sketch modes: resize -> synthesize sketch (style drawn from the mix) ->
    aligned random crop -> brightness/cutoff -> optional strokes on top.
    colorization: resize -> crop -> luma channel + sampled stroke raster.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; know {MODES}")
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), stable_hash(record.id, mode)]))
    photo = load_photo(record)

    if mode == "colorization":
        photo_r = resize_for_category(photo, params.category)
        limit = photo_r.height - CROP_SIZE
        origin = (int(rng.integers(0, limit + 1)), int(rng.integers(0, limit + 1)))
        target = crop(photo_r, origin)
        strokes = sample_color_strokes(target, params.stroke, rng)
        gray = ImageBuffer(luma_bt601(target.data), UNIT_RANGE, "gray")
        made = compose_colorization_input(gray, strokes)
        return TrainingPair(
            input=made,
            target=target,
            mode=mode,
            provenance={
                "record_id": record.id,
                "seed": seed,
                "style": None,
                "stroke_count": len(strokes),
                "strokes": strokes.to_json_dict(),
                "crop_origin": list(origin),
            },
        )

    style_params = _draw_style(params, rng)
    if record.external_sketch_path:
        with open(record.external_sketch_path, "rb") as f:
            s_arr = decode_png(f.read())
        if s_arr.ndim == 3:
            s_arr = luma_bt601(s_arr)
        sketch_full = ImageBuffer(s_arr, UNIT_RANGE, "sketch")
        if (photo.height, photo.width) != (sketch_full.height, sketch_full.width):
            raise ConfigError(f"record {record.id}: photo and external sketch misaligned")
        photo, sketch_full = _augment_external(photo, sketch_full, params, rng)
        style_name = "external"
    else:
        photo = resize_for_category(photo, params.category)
        sketch_full = synthesize_sketch(photo, style_params)
        style_name = style_params.style

    pair: AugmentedPair = resize_and_random_crop(photo, sketch_full, params.category, rng)
    sketch = pair.input_sketch
    if params.apply_brightness:
        factor = float(rng.uniform(*style_params.brightness_range))
        sketch = brightness_jitter(sketch, factor)
        pair.applied_brightness = factor
    if params.apply_cutoff:
        sketch, used = cutoff_augment(sketch, rng, style_params.cutoff)
        pair.cutoff_strokes_used = used

    if mode == "sketch_strokes":
        strokes = sample_color_strokes(pair.target_photo, params.stroke, rng)
    else:
        strokes = StrokeSet([])
    made = compose_sketch_input(sketch, strokes)
    return TrainingPair(
        input=made,
        target=pair.target_photo,
        mode=mode,
        provenance={
            "record_id": record.id,
            "seed": seed,
            "style": style_name,
            "stroke_count": len(strokes),
            "strokes": strokes.to_json_dict(),
            "crop_origin": list(pair.crop_origin),
            "brightness": pair.applied_brightness,
            "cutoff_strokes": pair.cutoff_strokes_used,
        },
    )


@dataclass
class Batch:
    """Contiguous net-range tensors (B, C, H, W) plus provenance."""

    inputs: np.ndarray
    targets: np.ndarray
    record_ids: list[str]
    mode: str


def pair_to_net_arrays(pair: TrainingPair) -> tuple[np.ndarray, np.ndarray]:
    x = unit_to_net(pair.input.data).transpose(2, 0, 1)
    y = unit_to_net(pair.target.data).transpose(2, 0, 1)
    return x, y


def iterate_epoch(
    manifest: Manifest,
    mode: str,
    batch_size: int,
    epoch_index: int,
    params: PairParams,
    split: str = "train",
):
    """Yield shuffled, contiguous batches; the final partial batch is dropped.

    Order is a pure function of (manifest.seed, epoch_index); pair content is
    a pure function of (record, mode, params, manifest.seed, epoch_index).
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    records = manifest.split_records(split)
    order_rng = np.random.default_rng(
        np.random.SeedSequence([manifest.seed & (2**63 - 1), epoch_index])
    )
    order = order_rng.permutation(len(records))
    n_batches = len(records) // batch_size
    for b in range(n_batches):
        chosen = [records[i] for i in order[b * batch_size : (b + 1) * batch_size]]
        xs, ys, ids = [], [], []
        for rec in chosen:
            pair_seed = stable_hash("pair", manifest.seed, epoch_index, rec.id) & (2**63 - 1)
            pair = make_training_pair(rec, mode, params, pair_seed)
            x, y = pair_to_net_arrays(pair)
            xs.append(x)
            ys.append(y)
            ids.append(rec.id)
        yield Batch(
            inputs=np.ascontiguousarray(np.stack(xs)),
            targets=np.ascontiguousarray(np.stack(ys)),
            record_ids=ids,
            mode=mode,
        )


def generate_synthetic_photo(seed: int, size: int = 256) -> ImageBuffer:
    """Flat-colored cartoon portrait for demos and desk-scale training runs.

    Piecewise-constant regions make stroke colors match region colors, which
    keeps synthetic stroke supervision clean.
    """
    rng = np.random.default_rng(seed)
    img = np.empty((size, size, 3), dtype=np.float32)
    img[:] = rng.uniform(0.2, 0.95, size=3).astype(np.float32)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = size * rng.uniform(0.42, 0.58), size * rng.uniform(0.42, 0.58)
    ry, rx = size * rng.uniform(0.26, 0.36), size * rng.uniform(0.2, 0.3)
    face = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    img[face] = rng.uniform(0.35, 0.9, size=3).astype(np.float32)

    for side in (-1, 1):
        ex, ey = cx + side * rx * 0.45, cy - ry * 0.25
        er = size * rng.uniform(0.025, 0.045)
        eye = (yy - ey) ** 2 + (xx - ex) ** 2 <= er**2
        img[eye] = rng.uniform(0.05, 0.5, size=3).astype(np.float32)

    mw, mh = rx * 0.5, ry * rng.uniform(0.08, 0.14)
    my = cy + ry * 0.45
    mouth = (np.abs(yy - my) <= mh) & (np.abs(xx - cx) <= mw)
    img[mouth] = rng.uniform(0.3, 0.8, size=3).astype(np.float32)
    return ImageBuffer(img, UNIT_RANGE, "rgb")
