"""The four training loss terms and their weighted combination.

All functions take torch tensors shaped ``(B, C, H, W)`` (or ``(C, H, W)``
for a single image) in the network's value range and preserve the input
dtype, so float64 verification against brute-force oracles is exact.

Realism scores must lie in the closed interval [0, 1]. Before a logarithm,
the diverging side is clamped at ``SCORE_EPS`` (log arguments never drop
below it); exact 0/1 scores on the non-diverging side are left untouched so
the analytic values (perfect discriminator -> loss 0) hold exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import math

import torch

from .errors import DomainError, ShapeError
from .modeling.features import FeatureExtractor

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    w_p: float = 1.0
    w_f: float = 1.0
    w_adv: float = 0.0
    w_tv: float = 0.0

    def __post_init__(self) -> None:
        for name in ("w_p", "w_f", "w_adv", "w_tv"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")

    def scaled(self, alpha: float) -> "LossWeights":
        return LossWeights(self.w_p * alpha, self.w_f * alpha, self.w_adv * alpha, self.w_tv * alpha)


@dataclass
class LossBreakdown:
    l_p: torch.Tensor
    l_f: torch.Tensor
    l_adv: torch.Tensor
    l_tv: torch.Tensor
    total: torch.Tensor

    def floats(self) -> dict[str, float]:
        return {
            "l_p": float(self.l_p.detach()),
            "l_f": float(self.l_f.detach()),
            "l_adv": float(self.l_adv.detach()),
            "l_tv": float(self.l_tv.detach()),
            "total": float(self.total.detach()),
        }


def _as_batched(t: torch.Tensor) -> torch.Tensor:
    if t.ndim == 3:
        return t.unsqueeze(0)
    if t.ndim == 4:
        return t
    raise ShapeError(f"expected (B, C, H, W) or (C, H, W), got {tuple(t.shape)}")


def pixel_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared difference over every pixel and channel."""
    if pred.shape != gt.shape:
        raise ShapeError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")
    diff = pred - gt
    return (diff * diff).mean()


def feature_loss(pred: torch.Tensor, gt: torch.Tensor, fx: FeatureExtractor) -> torch.Tensor:
    """Mean squared difference between extractor activations."""
    pred_b, gt_b = _as_batched(pred), _as_batched(gt)
    if pred_b.shape != gt_b.shape:
        raise ShapeError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")
    if pred_b.shape[1] != 3:
        raise ShapeError(f"feature loss expects 3-channel images, got {pred_b.shape[1]}")
    diff = fx(pred_b) - fx(gt_b)
    return (diff * diff).mean()


def _check_scores(scores: torch.Tensor, name: str) -> torch.Tensor:
    scores = torch.as_tensor(scores)
    if scores.ndim == 0:
        scores = scores.unsqueeze(0)
    if not torch.isfinite(scores).all():
        raise DomainError(f"{name} contains non-finite values")
    if (scores < 0).any() or (scores > 1).any():
        raise DomainError(f"{name} outside [0, 1]: min={scores.min():.4g} max={scores.max():.4g}")
    return scores


def _log_floor(t: torch.Tensor, what: str) -> torch.Tensor:
    if (t < SCORE_EPS).any():
        logger.debug("clamping %d %s value(s) below %g before log", int((t < SCORE_EPS).sum()), what, SCORE_EPS)
    return t.clamp_min(SCORE_EPS)


def adversarial_loss_g(d_scores: torch.Tensor) -> torch.Tensor:
    """Generator-side adversarial loss: minus the summed log realism scores."""
    scores = _check_scores(d_scores, "d_scores")
    return -torch.log(_log_floor(scores, "generator score")).sum()


def discriminator_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """Two-sided score loss: -sum log D(real) - sum log(1 - D(fake))."""
    real = _check_scores(d_real, "d_real")
    fake = _check_scores(d_fake, "d_fake")
    real_term = torch.log(_log_floor(real, "real score")).sum()
    fake_term = torch.log(_log_floor(1.0 - fake, "fake margin")).sum()
    return -real_term - fake_term


def tv_loss(img: torch.Tensor) -> torch.Tensor:
    """Squared neighbor differences summed over channels, divided by H*W.

    On degenerate 1-pixel-tall (or -wide) images the corresponding term is
    omitted rather than raising.
    """
    x = _as_batched(img)
    _, _, h, w = x.shape
    total = torch.zeros((), dtype=x.dtype, device=x.device)
    if w >= 2:
        dh = x[:, :, :, 1:] - x[:, :, :, :-1]
        total = total + (dh * dh).sum(dim=(1, 2, 3)).mean()
    if h >= 2:
        dv = x[:, :, 1:, :] - x[:, :, :-1, :]
        total = total + (dv * dv).sum(dim=(1, 2, 3)).mean()
    return total / (h * w)


def total_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    d_scores: torch.Tensor | None,
    weights: LossWeights,
    fx: FeatureExtractor,
) -> LossBreakdown:
    """Weighted combination of the four terms.

    Zero-weight terms are still evaluated for logging but skip gradient
    tracking. ``d_scores`` may be None only when ``w_adv`` is zero.
    """
    zero = torch.zeros((), dtype=pred.dtype, device=pred.device)

    def term(weight: float, compute):
        if weight == 0.0:
            with torch.no_grad():
                return compute()
        return compute()

    l_p = term(weights.w_p, lambda: pixel_loss(pred, gt))
    l_f = term(weights.w_f, lambda: feature_loss(pred, gt, fx))
    if d_scores is None:
        if weights.w_adv != 0.0:
            raise DomainError("w_adv > 0 requires discriminator scores")
        l_adv = zero
    else:
        l_adv = term(weights.w_adv, lambda: adversarial_loss_g(d_scores))
    l_tv = term(weights.w_tv, lambda: tv_loss(pred))

    total = weights.w_p * l_p + weights.w_f * l_f + weights.w_adv * l_adv + weights.w_tv * l_tv
    return LossBreakdown(l_p=l_p, l_f=l_f, l_adv=l_adv, l_tv=l_tv, total=total)
