from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import NoValidPixelsError
from ..geometry import DepthMap

RADICAND_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.85
    alpha: float = 10.0

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def _as_tensor(d, dtype=None):
    if isinstance(d, DepthMap):
        return torch.tensor(d.filled(1.0), dtype=dtype or torch.float64), torch.tensor(d.valid)
    return d, None


def si_loss(pred, gt, cfg: LossConfig = LossConfig(), valid=None) -> torch.Tensor:
    """Scaled scale-invariant log loss ``alpha * sqrt(mean(g^2) - lam * mean(g)^2)``.

    ``g = log pred - log gt`` over pixels with valid ground truth. Accepts
    DepthMaps or tensors shaped (H, W) / (B, H, W); batches are averaged per
    image. Radicands at or below 1e-12 give exactly zero (with zero gradient)
    instead of an unbounded sqrt slope.
    """
    gt_t, gt_mask = _as_tensor(gt)
    pred_t, _ = _as_tensor(pred, dtype=gt_t.dtype)
    if pred_t.shape != gt_t.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred_t.shape)} vs gt {tuple(gt_t.shape)}")
    if valid is None:
        valid = gt_mask if gt_mask is not None else torch.isfinite(gt_t) & (gt_t > 0)
    valid = torch.as_tensor(valid, dtype=torch.bool)
    if pred_t.dim() == 2:
        pred_t, gt_t, valid = pred_t.unsqueeze(0), gt_t.unsqueeze(0), valid.unsqueeze(0)

    count = valid.flatten(1).sum(dim=1)
    if bool((count == 0).any()):
        raise NoValidPixelsError("an image has no valid ground-truth pixels")
    safe_gt = torch.where(valid, gt_t, torch.ones_like(gt_t))
    safe_pred = torch.where(valid, pred_t, torch.ones_like(pred_t))
    g = (torch.log(safe_pred) - torch.log(safe_gt)) * valid
    T = count.to(g.dtype)
    mean_g = g.flatten(1).sum(dim=1) / T
    mean_g2 = (g * g).flatten(1).sum(dim=1) / T
    radicand = mean_g2 - cfg.lam * mean_g * mean_g
    positive = ~(radicand <= RADICAND_FLOOR)  # NaN stays NaN
    root = torch.sqrt(torch.where(positive, radicand, torch.full_like(radicand, RADICAND_FLOOR)))
    per_image = cfg.alpha * torch.where(positive, root, torch.zeros_like(root))
    return per_image.mean()

