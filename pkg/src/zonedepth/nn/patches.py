"""Bilinear patch sampling on feature maps and its weight-normalized transpose.

Zone footprints rarely align with feature cells, so each zone is resampled to
a fixed P x P grid (cell centers of the rectangle) and fused features are
splatted back with the same bilinear weights. Coordinates follow the package
convention: cell ``(i, j)`` of a map is centered at ``(j + 0.5, i + 0.5)``.
"""

from __future__ import annotations

import torch

from ..errors import PatchUndefinedError
from ..geometry import Rect


def bilinear_taps(rects: torch.Tensor, P: int, height: int, width: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Flat cell indices and weights of the 4 bilinear taps for every patch sample.

    ``rects`` is (..., 4) as ``x_min, y_min, x_max, y_max`` in map cells.
    Returns ``(index, weight)``, each (..., P*P, 4). Samples beyond the outer
    cell centers use edge values.
    """
    steps = (torch.arange(P, dtype=rects.dtype, device=rects.device) + 0.5) / P
    x0, y0, x1, y1 = rects.unbind(-1)
    xs = x0.unsqueeze(-1) + steps * (x1 - x0).unsqueeze(-1)  # (..., P)
    ys = y0.unsqueeze(-1) + steps * (y1 - y0).unsqueeze(-1)
    u = (xs - 0.5).clamp(0, width - 1)
    v = (ys - 0.5).clamp(0, height - 1)
    u0 = u.detach().floor().clamp(max=max(width - 2, 0)).long()
    v0 = v.detach().floor().clamp(max=max(height - 2, 0)).long()
    fu = u - u0
    fv = v - v0
    u1 = (u0 + 1).clamp(max=width - 1)
    v1 = (v0 + 1).clamp(max=height - 1)

    # grid layout: row-major over (y, x)
    def grid(a, b):
        return (a.unsqueeze(-1) * width + b.unsqueeze(-2)).flatten(-2)

    def wgrid(a, b):
        return (a.unsqueeze(-1) * b.unsqueeze(-2)).flatten(-2)

    index = torch.stack([grid(v0, u0), grid(v0, u1), grid(v1, u0), grid(v1, u1)], dim=-1)
    weight = torch.stack([
        wgrid(1 - fv, 1 - fu), wgrid(1 - fv, fu), wgrid(fv, 1 - fu), wgrid(fv, fu),
    ], dim=-1)
    return index, weight


def interpolation_matrix(rects: torch.Tensor, P: int, height: int, width: int) -> torch.Tensor:
    """Dense (B, Z*P*P, H*W) bilinear sampling operator for (B, Z, 4) rects."""
    B, Z = rects.shape[:2]
    index, weight = bilinear_taps(rects, P, height, width)
    M = torch.zeros(B, Z * P * P, height * width, dtype=rects.dtype, device=rects.device)
    return M.scatter_add_(2, index.reshape(B, Z * P * P, 4), weight.reshape(B, Z * P * P, 4))


def interpolate_patches(fmap: torch.Tensor, rects: torch.Tensor, P: int,
                        matrix: torch.Tensor | None = None) -> torch.Tensor:
    """(B, C, H, W) map and (B, Z, 4) rects -> (B, Z, P*P, C) sampled features."""
    B, C, H, W = fmap.shape
    Z = rects.shape[1]
    if matrix is None:
        matrix = interpolation_matrix(rects.to(fmap.dtype), P, H, W)
    return (matrix @ fmap.flatten(2).transpose(1, 2)).view(B, Z, P * P, C)


def scatter_patches(patches: torch.Tensor, rects: torch.Tensor, target: torch.Tensor,
                    zone_mask: torch.Tensor | None = None, matrix: torch.Tensor | None = None) -> torch.Tensor:
    """Transpose of :func:`interpolate_patches`, normalized by accumulated weight.

    Cells reached by at least one (unmasked) patch sample get the
    weight-averaged sample values; all other cells keep ``target``.
    """
    B, C, H, W = target.shape
    Z, PP = patches.shape[1], patches.shape[2]
    P = int(round(PP ** 0.5))
    if matrix is None:
        matrix = interpolation_matrix(rects.to(target.dtype), P, H, W)
    src = patches.reshape(B, Z * PP, C)
    if zone_mask is not None:
        keep = zone_mask.to(target.dtype).repeat_interleave(PP, dim=1).unsqueeze(-1)  # (B, Z*PP, 1)
        src = src * keep
        den = (matrix * keep).sum(dim=1)
    else:
        den = matrix.sum(dim=1)
    num = matrix.transpose(1, 2) @ src  # (B, HW, C)
    covered = den > 0
    avg = num / torch.where(covered, den, torch.ones_like(den)).unsqueeze(-1)
    flat_target = target.flatten(2).transpose(1, 2)
    out = torch.where(covered.unsqueeze(-1), avg, flat_target)
    return out.transpose(1, 2).reshape(B, C, H, W)


def coverage(rects: torch.Tensor, P: int, height: int, width: int, zone_mask: torch.Tensor) -> torch.Tensor:
    """(B, H, W) boolean map of cells receiving any bilinear weight from unmasked zones."""
    B, Z = rects.shape[:2]
    M = interpolation_matrix(rects, P, height, width)
    keep = zone_mask.to(M.dtype).repeat_interleave(P * P, dim=1).unsqueeze(-1)
    return ((M * keep).sum(dim=1) > 0).view(B, height, width)


def _rect_tensor(rect, like: torch.Tensor) -> torch.Tensor:
    if isinstance(rect, Rect):
        rect = rect.as_tuple()
    return torch.as_tensor(rect, dtype=like.dtype, device=like.device).reshape(-1, 4)


def _check_intersects(rects: torch.Tensor, height: int, width: int) -> None:
    x0, y0, x1, y1 = rects.detach().unbind(-1)
    hit = (x1 > 0) & (x0 < width) & (y1 > 0) & (y0 < height) & (x1 > x0) & (y1 > y0)
    if not bool(hit.all()):
        raise PatchUndefinedError("patch rectangle does not intersect the feature map")


def interpolate_patch(feature_map: torch.Tensor, rect, P: int) -> torch.Tensor:
    """Sample a (C, H, W) map on a P x P grid covering ``rect``; returns (C, P, P)."""
    C, H, W = feature_map.shape
    r = _rect_tensor(rect, feature_map)
    _check_intersects(r, H, W)
    out = interpolate_patches(feature_map.unsqueeze(0), r.view(1, 1, 4), P)
    return out.view(P, P, C).permute(2, 0, 1)


def scatter_patch_back(fused_patch: torch.Tensor, rect, target_map: torch.Tensor) -> torch.Tensor:
    """Splat (C, P, P) patches (or a (Z, C, P, P) stack with Z rects) into a (C, H, W) map."""
    C, H, W = target_map.shape
    patches = fused_patch if fused_patch.dim() == 4 else fused_patch.unsqueeze(0)
    rects = _rect_tensor(rect, target_map)
    if rects.shape[0] != patches.shape[0] or patches.shape[1] != C or patches.shape[2] != patches.shape[3]:
        raise ValueError("patch stack and rects do not match")
    _check_intersects(rects, H, W)
    Z, _, P, _ = patches.shape
    flat = patches.permute(0, 2, 3, 1).reshape(1, Z, P * P, C)
    return scatter_patches(flat, rects.unsqueeze(0), target_map.unsqueeze(0))[0]
