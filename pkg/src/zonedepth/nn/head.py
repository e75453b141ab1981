"""Bin-based depth head: a global bin-width vector and per-pixel bin weights."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass
class BinPrediction:
    widths: torch.Tensor  # (B, n_bins), sums to 1
    coefficients: torch.Tensor  # (B, n_bins, H, W), sums to 1 over bins


def bins_from_logits(width_logits: torch.Tensor, coef_logits: torch.Tensor) -> BinPrediction:
    return BinPrediction(torch.softmax(width_logits, dim=1), torch.softmax(coef_logits, dim=1))


class BinHead(nn.Module):
    """Two conv layers: one pooled globally into bin widths, one giving per-pixel coefficients."""

    def __init__(self, channels: int, n_bins: int):
        super().__init__()
        self.width_conv = nn.Conv2d(channels, n_bins, 3, padding=1)
        self.coef_conv = nn.Conv2d(channels, n_bins, 3, padding=1)

    def forward(self, feats: torch.Tensor) -> BinPrediction:
        width_logits = self.width_conv(feats).mean(dim=(2, 3))
        return bins_from_logits(width_logits, self.coef_conv(feats))


def predict_bins(final_feats: torch.Tensor, head: BinHead) -> BinPrediction:
    return head(final_feats)


def bin_centers(widths: torch.Tensor, d_min: float, d_max: float) -> torch.Tensor:
    """Center of each bin when [d_min, d_max] is cut into consecutive widths."""
    edges_hi = torch.cumsum(widths, dim=-1)
    return d_min + (d_max - d_min) * (edges_hi - 0.5 * widths)


def bins_to_depth(bp: BinPrediction, d_min: float, d_max: float) -> torch.Tensor:
    """(B, H, W) depth as the coefficient-weighted sum of bin centers."""
    centers = bin_centers(bp.widths, d_min, d_max)
    return torch.einsum("bn,bnhw->bhw", centers, bp.coefficients)
