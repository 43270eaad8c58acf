"""Desk-scale quantitative evaluation: reconstruction, stroke compliance, diversity.

Models enter as ``Callable[[TrainingPair], ImageBuffer]`` returning a
unit-range RGB prediction; ``generator_model_fn`` wraps a trained network.
Letting the callable see the whole pair keeps oracle models (identity,
constant, stroke-copying) trivial to express in tests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch
from scipy import ndimage

from .data import TrainingPair, pair_to_net_arrays
from .imagery import ImageBuffer, UNIT_RANGE, net_to_unit
from .losses import feature_loss
from .modeling.features import FeatureExtractor
from .modeling.generator import GeneratorNetwork
from .strokes import StrokeSet, compose_sketch_input, stroke_coverage

ModelFn = Callable[[TrainingPair], ImageBuffer]


def generator_model_fn(net: GeneratorNetwork) -> ModelFn:
    def run(pair: TrainingPair) -> ImageBuffer:
        x, _ = pair_to_net_arrays(pair)
        was_training = net.training
        net.eval()
        try:
            with torch.no_grad():
                y = net(torch.from_numpy(x).unsqueeze(0))
        finally:
            net.train(was_training)
        return ImageBuffer(net_to_unit(y[0].permute(1, 2, 0).numpy()), UNIT_RANGE, "rgb")

    return run


@dataclass
class EvalReport:
    rows: list[dict]
    aggregates: dict
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {"config_hash": self.config_hash, "aggregates": self.aggregates, "rows": self.rows},
            indent=1,
        )

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.rows[0].keys()))
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _net_mse(pred: ImageBuffer, target: ImageBuffer) -> float:
    """Pixel MSE in the network's [-1, 1] units."""
    diff = pred.converted((-1.0, 1.0)).data.astype(np.float64) - target.converted(
        (-1.0, 1.0)
    ).data.astype(np.float64)
    return float((diff * diff).mean())


def eval_reconstruction(
    model: ModelFn, pairs: list[TrainingPair], fx: FeatureExtractor
) -> EvalReport:
    rows = []
    for pair in pairs:
        pred = model(pair)
        pt = torch.from_numpy(pred.converted((-1.0, 1.0)).data.transpose(2, 0, 1)).double()
        gt = torch.from_numpy(pair.target.converted((-1.0, 1.0)).data.transpose(2, 0, 1)).double()
        rows.append(
            {
                "id": pair.provenance.get("record_id", "?"),
                "pixel_mse": _net_mse(pred, pair.target),
                "feature_loss": float(feature_loss(pt, gt, fx)),
            }
        )
    aggregates = {
        "n": len(rows),
        "pixel_mse_mean": float(np.mean([r["pixel_mse"] for r in rows])) if rows else math.nan,
        "feature_loss_mean": float(np.mean([r["feature_loss"] for r in rows])) if rows else math.nan,
    }
    return EvalReport(rows, aggregates, _config_hash({"eval": "reconstruction", "n": len(rows)}))


@dataclass
class StrokedPair:
    """A training pair together with the strokes baked into its input."""

    pair: TrainingPair
    strokes: StrokeSet


def _dilated_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask
    return ndimage.binary_dilation(mask, iterations=radius)


def stroke_color_distance(
    output: ImageBuffer, strokes: StrokeSet, dilation_radius: int = 1
) -> float:
    """Mean Euclidean RGB distance between output and stroke colors under masks.

    Each stroke is scored over its (dilated) coverage minus pixels any other
    stroke covers, so overlap pixels, whose target color is ambiguous under
    painter's order, never count against either stroke.
    """
    out = output.converted(UNIT_RANGE).data.astype(np.float64)
    h, w = output.height, output.width
    coverages = [stroke_coverage((h, w), s) for s in strokes]
    dists = []
    for i, stroke in enumerate(strokes):
        others = np.zeros((h, w), dtype=bool)
        for j, cov in enumerate(coverages):
            if j != i:
                others |= cov
        mask = _dilated_mask(coverages[i], dilation_radius) & ~others
        if not mask.any():
            continue
        diff = out[mask] - np.asarray(stroke.color, dtype=np.float64)
        dists.append(np.linalg.norm(diff, axis=1))
    if not dists:
        return math.nan
    return float(np.concatenate(dists).mean())


def eval_stroke_compliance(
    model: ModelFn, stroked_pairs: list[StrokedPair], dilation_radius: int = 1
) -> tuple[float, EvalReport]:
    """Score color compliance; the report also carries radii 0..2 for context."""
    rows = []
    for sp in stroked_pairs:
        pred = model(sp.pair)
        row = {"id": sp.pair.provenance.get("record_id", "?")}
        for r in (0, 1, 2):
            row[f"compliance_r{r}"] = stroke_color_distance(pred, sp.strokes, r)
        rows.append(row)
    key = f"compliance_r{dilation_radius}"
    values = [r[key] for r in rows if not math.isnan(r[key])]
    score = float(np.mean(values)) if values else math.nan
    aggregates = {
        "n": len(rows),
        "dilation_radius": dilation_radius,
        "compliance": score,
        **{
            f"compliance_r{r}_mean": float(
                np.mean([row[f"compliance_r{r}"] for row in rows
                         if not math.isnan(row[f"compliance_r{r}"])] or [math.nan])
            )
            for r in (0, 1, 2)
        },
    }
    return score, EvalReport(rows, aggregates, _config_hash({"eval": "stroke_compliance", "n": len(rows), "radius": dilation_radius}))


def random_color_compliance_baseline(
    model: ModelFn, stroked_pairs: list[StrokedPair], rng: np.random.Generator, dilation_radius: int = 1
) -> float:
    """Compliance of the same outputs against randomly reassigned stroke colors.

    Colors are permuted across the whole stroke population, so the baseline
    keeps the empirical color distribution but destroys any correlation with
    the outputs. A model that ignores strokes lands at this level; a
    compliant model beats it.
    """
    all_colors = [s.color for sp in stroked_pairs for s in sp.strokes]
    order = rng.permutation(len(all_colors))
    values = []
    cursor = 0
    for sp in stroked_pairs:
        pred = model(sp.pair)
        recolored = []
        for s in sp.strokes:
            recolored.append(
                type(s)(points=s.points.copy(), color=all_colors[order[cursor]], width=s.width)
            )
            cursor += 1
        v = stroke_color_distance(pred, StrokeSet(recolored), dilation_radius)
        if not math.isnan(v):
            values.append(v)
    return float(np.mean(values)) if values else math.nan


def pairwise_output_distance(outputs: list[ImageBuffer]) -> float:
    """Mean RMS distance over all unordered output pairs (unit range)."""
    if len(outputs) < 2:
        return 0.0
    arrs = [o.converted(UNIT_RANGE).data.astype(np.float64) for o in outputs]
    dists = []
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            dists.append(math.sqrt(((arrs[i] - arrs[j]) ** 2).mean()))
    return float(np.mean(dists))


def eval_diversity(
    model: ModelFn,
    sketch: ImageBuffer,
    stroke_variations: list[StrokeSet],
    target: ImageBuffer | None = None,
) -> float:
    """How much stroke edits move the output: mean pairwise distance across
    the same sketch composed with each stroke variation."""
    outputs = []
    for strokes in stroke_variations:
        made = compose_sketch_input(sketch, strokes)
        pair = TrainingPair(
            input=made,
            target=target if target is not None else ImageBuffer(np.zeros((made.height, made.width, 3), dtype=np.float32)),
            mode="sketch_strokes",
            provenance={"record_id": "diversity-probe"},
        )
        outputs.append(model(pair))
    return pairwise_output_distance(outputs)
