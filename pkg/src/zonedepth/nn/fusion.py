"""One decoder stage of the fusion network.

Each stage alternates, ``n_alternations`` times:

1. distribution-to-image cross-attention (image patch queries, zone tokens as keys/values),
2. image-to-distribution cross-attention (zone tokens query their patch),
3. global image self-attention,

then concatenates the attended map with the incoming map and the encoder skip
feature and decodes with a small conv block. With patch-distribution
correspondence on, steps 1 and 2 only pair a zone with the features sampled
inside its footprint; off, every pixel sees every valid zone.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import MultiHeadAttention, sinusoidal_2d
from .patches import interpolate_patches, interpolation_matrix, scatter_patches


class FusionStage(nn.Module):
    def __init__(self, dim: int, out_dim: int, cfg, n_zones: int):
        super().__init__()
        self.cfg = cfg
        self.dim = dim
        self.d2i = MultiHeadAttention(dim, cfg.heads)
        self.i2d = MultiHeadAttention(dim, cfg.heads)
        self.self_attn = MultiHeadAttention(dim, cfg.heads)
        self.zone_embedding = nn.Parameter(torch.randn(n_zones, dim) * 0.02)
        self.decode = nn.Sequential(
            nn.Conv2d(3 * dim, dim, 3, padding=1), nn.ReLU(),
            nn.Conv2d(dim, out_dim, 3, padding=1), nn.ReLU(),
        )

    def attend(self, x, tokens, rects, token_mask, patch_size):
        """Attention part of the stage; returns ``(x_attended, tokens)``.

        x: (B, C, H, W); tokens: (B, Z, n_s, C) or None; rects: (B, Z, 4) in
        cells of this level; token_mask: (B, Z) zones that carry tokens.
        """
        cfg = self.cfg
        B, C, H, W = x.shape
        pe = sinusoidal_2d(H, W, C, dtype=x.dtype).to(x.device)
        pe_flat = pe.flatten(1).T  # (HW, C)
        use_tokens = tokens is not None and bool(token_mask.any())
        key_pos = None
        if use_tokens:
            Z = tokens.shape[1]
            key_pos = self.zone_embedding[:Z].unsqueeze(1)  # (Z, 1, C)
            if cfg.patch_dist_corr:
                M = interpolation_matrix(rects.to(x.dtype), patch_size, H, W)
                patch_pos = interpolate_patches(pe.expand(B, -1, -1, -1), rects, patch_size, M)

        for _ in range(cfg.n_alternations):
            if use_tokens and cfg.dist_img_attn:
                if cfg.patch_dist_corr:
                    patches = interpolate_patches(x, rects, patch_size, M)
                    delta = self.d2i(patches, tokens, query_pos=patch_pos, key_pos=key_pos)
                    x = x + scatter_patches(delta, rects, torch.zeros_like(x), token_mask, M)
                else:
                    q = x.flatten(2).transpose(1, 2)
                    kv = tokens.flatten(1, 2)
                    mask = token_mask.repeat_interleave(tokens.shape[2], dim=1).unsqueeze(1)
                    delta = self.d2i(q, kv, mask=mask, query_pos=pe_flat,
                                     key_pos=key_pos.expand(-1, tokens.shape[2], -1).flatten(0, 1))
                    x = x + delta.transpose(1, 2).view(B, C, H, W)

            if use_tokens and cfg.img_dist_attn:
                keep = token_mask.to(x.dtype).view(B, -1, 1, 1)
                if cfg.patch_dist_corr:
                    patches = interpolate_patches(x, rects, patch_size, M)
                    delta = self.i2d(tokens, patches, query_pos=key_pos, key_pos=patch_pos)
                else:
                    q = tokens.flatten(1, 2)
                    kv = x.flatten(2).transpose(1, 2)
                    delta = self.i2d(q, kv, query_pos=key_pos.expand(-1, tokens.shape[2], -1).flatten(0, 1),
                                     key_pos=pe_flat).view_as(tokens)
                tokens = tokens + delta * keep

            if cfg.img_self_attn:
                flat = x.flatten(2).transpose(1, 2)
                delta = self.self_attn(flat, flat, query_pos=pe_flat, key_pos=pe_flat)
                x = x + delta.transpose(1, 2).view(B, C, H, W)
        return x, tokens

    def forward(self, x, skip, tokens, rects, token_mask, patch_size, out_size=None):
        x_att, tokens = self.attend(x, tokens, rects, token_mask, patch_size)
        y = self.decode(torch.cat([x_att, x, skip], dim=1))
        if out_size is not None:
            y = F.interpolate(y, size=out_size, mode="bilinear", align_corners=False)
        return y, tokens


class ConcatStage(nn.Module):
    """Ablation stage: pooled zone features are splatted over their footprints and concatenated."""

    def __init__(self, dim: int, out_dim: int, cfg, n_zones: int):
        super().__init__()
        self.proj = nn.Linear(dim, dim)
        self.decode = nn.Sequential(
            nn.Conv2d(3 * dim, dim, 3, padding=1), nn.ReLU(),
            nn.Conv2d(dim, out_dim, 3, padding=1), nn.ReLU(),
        )

    def forward(self, x, skip, pooled, rects, token_mask, patch_size, out_size=None):
        zone_map = torch.zeros_like(x)
        if pooled is not None and bool(token_mask.any()):
            feats = self.proj(pooled).unsqueeze(2).expand(-1, -1, patch_size * patch_size, -1)
            zone_map = scatter_patches(feats, rects, zone_map, token_mask)
        y = self.decode(torch.cat([zone_map, x, skip], dim=1))
        if out_size is not None:
            y = F.interpolate(y, size=out_size, mode="bilinear", align_corners=False)
        return y, pooled
