from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoders import DistributionEncoder, ImageEncoder
from .fusion import ConcatStage, FusionStage
from .head import BinHead, BinPrediction, bins_to_depth
from .patches import scatter_patches
from .sampling import sample_zones

FUSION_MODES = ("attention", "concat")
DIST_ENCODINGS = ("samples", "mean-var", "five-channel")


@dataclass(frozen=True)
class FusionConfig:
    n_alternations: int = 2
    levels: int = 3  # fused decoder stages, counted from the coarsest
    heads: int = 2
    dims: tuple = (32, 24, 16)  # per stage, coarse (stride 16) to fine (stride 4)
    n_bins: int = 32
    d_min: float = 0.1
    d_max: float = 8.0
    n_samples: int = 16
    patch_size: int = 1  # at the coarsest stage; doubles per finer stage
    n_zones: int = 64
    patch_dist_corr: bool = True
    img_self_attn: bool = True
    img_dist_attn: bool = True
    dist_img_attn: bool = True
    refine: bool = True
    prob_sampling: bool = True
    fusion_mode: str = "attention"
    dist_encoding: str = "samples"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.n_alternations < 1:
            raise ValueError("n_alternations must be >= 1")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if not self.d_min < self.d_max:
            raise ValueError("need d_min < d_max")
        if len(self.dims) != 3 or not 0 <= self.levels <= 3:
            raise ValueError("the pyramid has exactly three stages")
        if any(d % 4 or d % self.heads for d in self.dims):
            raise ValueError("dims must be divisible by 4 and by the head count")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.dist_encoding not in DIST_ENCODINGS:
            raise ValueError(f"dist_encoding must be one of {DIST_ENCODINGS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown fusion config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ModelInput:
    """A batch: images plus zone readings and their footprints in image pixels."""

    rgb: torch.Tensor  # (B, 3, H, W) in [0, 1]
    means: torch.Tensor  # (B, Z)
    variances: torch.Tensor  # (B, Z)
    valid: torch.Tensor  # (B, Z) bool: valid reading with a usable footprint
    rects: torch.Tensor  # (B, Z, 4) x_min, y_min, x_max, y_max; ignored where not valid

    def to(self, dtype) -> "ModelInput":
        return ModelInput(self.rgb.to(dtype), self.means.to(dtype), self.variances.to(dtype),
                          self.valid, self.rects.to(dtype))

    def clean_rects(self) -> torch.Tensor:
        # placeholder geometry for masked zones keeps the bilinear taps finite
        dummy = torch.tensor([0.0, 0.0, 1.0, 1.0], dtype=self.rects.dtype)
        return torch.where(self.valid.unsqueeze(-1), self.rects, dummy)


class ZoneFusionNet(nn.Module):
    def __init__(self, cfg: FusionConfig = FusionConfig()):
        super().__init__()
        self.cfg = cfg
        coarse_to_fine = cfg.dims
        in_channels = 5 if cfg.dist_encoding == "five-channel" else 3
        self.image_encoder = ImageEncoder(tuple(reversed(coarse_to_fine)), in_channels=in_channels)
        center = 0.5 * (cfg.d_min + cfg.d_max)
        scale = 0.5 * (cfg.d_max - cfg.d_min)
        self.dist_encoder = None
        if cfg.dist_encoding != "five-channel":
            self.dist_encoder = DistributionEncoder(
                coarse_to_fine, in_channels=2 if cfg.dist_encoding == "mean-var" else 1, center=center, scale=scale)
            self.pooled_proj = nn.ModuleList(nn.Linear(d, d) for d in coarse_to_fine)
            self.carry_proj = nn.ModuleList(nn.Linear(a, b) for a, b in zip(coarse_to_fine[:-1], coarse_to_fine[1:]))
        stage_cls = FusionStage if cfg.fusion_mode == "attention" else ConcatStage
        outs = coarse_to_fine[1:] + coarse_to_fine[-1:]
        self.stages = nn.ModuleList(stage_cls(d, o, cfg, cfg.n_zones) for d, o in zip(coarse_to_fine, outs))
        final = coarse_to_fine[-1]
        self.refiner = None
        if cfg.refine:
            # sees the full-resolution image so it can sharpen edges lost to the stride-4 decoder
            self.refiner = nn.Sequential(nn.Conv2d(final + 3, final, 3, padding=1), nn.ReLU(),
                                         nn.Conv2d(final, final, 3, padding=1))
        self.head = BinHead(final, cfg.n_bins)

    # --- inputs -----------------------------------------------------------

    def zone_samples(self, inp: ModelInput) -> torch.Tensor:
        cfg = self.cfg
        if cfg.dist_encoding == "mean-var":
            return torch.stack([inp.means, inp.variances], dim=-1).unsqueeze(-2)
        return sample_zones(inp.means, inp.variances, cfg.n_samples, not cfg.prob_sampling, cfg.d_min, cfg.d_max)

    def _five_channel(self, inp: ModelInput) -> torch.Tensor:
        B, _, H, W = inp.rgb.shape
        stats = torch.stack([inp.means, inp.variances], dim=-1).unsqueeze(2)  # (B, Z, 1, 2)
        planes = scatter_patches(stats, inp.clean_rects(), torch.zeros(B, 2, H, W, dtype=inp.rgb.dtype), inp.valid)
        return torch.cat([inp.rgb, planes], dim=1)

    # --- forward ----------------------------------------------------------

    def predict(self, inp: ModelInput) -> BinPrediction:
        cfg = self.cfg
        rgb = self._five_channel(inp) if cfg.dist_encoding == "five-channel" else inp.rgb
        B, _, H, W = rgb.shape
        feats = self.image_encoder(rgb)[::-1]  # coarse to fine
        strides = ImageEncoder.strides[::-1]
        rects = inp.clean_rects()
        mask = inp.valid

        per_sample = pooled = None
        if self.dist_encoder is not None:
            per_sample, pooled = self.dist_encoder(self.zone_samples(inp))

        x = feats[0]
        tokens = None
        for i, stage in enumerate(self.stages):
            skip = feats[i]
            out_size = feats[i + 1].shape[-2:] if i + 1 < len(self.stages) else None
            level_rects = rects / strides[i]
            P = cfg.patch_size * 2 ** i
            fused = i < cfg.levels
            if cfg.fusion_mode == "concat":
                x, _ = stage(x, skip, pooled[i] if (pooled is not None and fused) else None,
                             level_rects, mask, P, out_size)
                continue
            if per_sample is not None and fused:
                level_tokens = per_sample[i] + self.pooled_proj[i](pooled[i]).unsqueeze(-2)
                if tokens is not None:
                    level_tokens = level_tokens + self.carry_proj[i - 1](tokens)
                tokens = level_tokens
                x, tokens = stage(x, skip, tokens, level_rects, mask, P, out_size)
            else:
                x, _ = stage(x, skip, None, level_rects, mask, P, out_size)

        x = F.interpolate(x, size=(H, W), mode="bilinear", align_corners=False)
        if self.refiner is not None:
            x = x + self.refiner(torch.cat([x, inp.rgb], dim=1))
        return self.head(x)

    def forward(self, inp: ModelInput) -> torch.Tensor:
        return bins_to_depth(self.predict(inp), self.cfg.d_min, self.cfg.d_max)


def with_toggles(cfg: FusionConfig, **kw) -> FusionConfig:
    return replace(cfg, **kw)
