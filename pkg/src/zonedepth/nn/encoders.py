from __future__ import annotations

import torch
import torch.nn as nn


class DistributionEncoder(nn.Module):
    """Stacked shared per-sample MLPs with max-pooling over the samples of each zone.

    Level ``l`` consumes the per-sample features of level ``l - 1`` (the raw,
    normalized sample values for the first level), so no level reduces the
    number of samples.
    """

    def __init__(self, dims: tuple[int, ...], in_channels: int = 1, center: float = 0.0, scale: float = 1.0):
        super().__init__()
        self.center = center
        self.scale = scale
        layers = []
        prev = in_channels
        for d in dims:
            layers.append(nn.Sequential(nn.Linear(prev, d), nn.ReLU(), nn.Linear(d, d), nn.ReLU()))
            prev = d
        self.levels = nn.ModuleList(layers)

    def forward(self, samples: torch.Tensor) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
        """``samples`` is (..., n_s) or (..., n_s, in_channels).

        Returns per-level per-sample features (..., n_s, d_l) and pooled
        zone features (..., d_l).
        """
        if samples.numel() == 0:
            raise ValueError("empty sample list")
        h = samples.unsqueeze(-1) if self.levels[0][0].in_features == 1 else samples
        h = (h - self.center) / self.scale
        per_sample, pooled = [], []
        for level in self.levels:
            h = level(h)
            per_sample.append(h)
            pooled.append(h.amax(dim=-2))
        return per_sample, pooled


def encode_distribution(samples, encoder: DistributionEncoder) -> list[torch.Tensor]:
    """Pooled multi-level features for a (Z, n_s) batch of zone samples."""
    samples = torch.as_tensor(samples, dtype=next(encoder.parameters()).dtype)
    if samples.numel() == 0:
        raise ValueError("empty sample list")
    return encoder(samples)[1]


def _conv(cin, cout, stride):
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride=stride, padding=1), nn.ReLU())


class ImageEncoder(nn.Module):
    """Small strided conv pyramid producing features at strides 4, 8 and 16.

    ``channels`` lists widths fine-to-coarse. Odd sizes round up at each
    stride-2 step, so maps are exactly (H/s, W/s) when H and W divide by 16.
    """

    strides = (4, 8, 16)

    def __init__(self, channels: tuple[int, int, int] = (16, 24, 32), in_channels: int = 3):
        super().__init__()
        c4, c8, c16 = channels
        self.in_channels = in_channels
        self.stem = nn.Sequential(_conv(in_channels, c4 // 2, 2), _conv(c4 // 2, c4, 2), _conv(c4, c4, 1))
        self.down8 = nn.Sequential(_conv(c4, c8, 2), _conv(c8, c8, 1))
        self.down16 = nn.Sequential(_conv(c8, c16, 2), _conv(c16, c16, 1))

    def forward(self, rgb: torch.Tensor) -> list[torch.Tensor]:
        if rgb.dim() != 4 or rgb.shape[1] != self.in_channels:
            raise ValueError(f"expected (B, {self.in_channels}, H, W) input, got {tuple(rgb.shape)}")
        f4 = self.stem(rgb)
        f8 = self.down8(f4)
        f16 = self.down16(f8)
        return [f4, f8, f16]


def extract_image_features(rgb: torch.Tensor, encoder: ImageEncoder) -> list[torch.Tensor]:
    """Feature pyramid for an (H, W, 3) image or an (B, 3, H, W) batch, fine to coarse."""
    if rgb.dim() == 3:
        if rgb.shape[-1] != encoder.in_channels:
            raise ValueError(f"expected (H, W, {encoder.in_channels}) image, got {tuple(rgb.shape)}")
        rgb = rgb.permute(2, 0, 1).unsqueeze(0)
    return encoder(rgb)
