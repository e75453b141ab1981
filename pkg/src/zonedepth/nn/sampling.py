"""Turning a per-zone Gaussian into a fixed set of depth hypotheses."""

from __future__ import annotations

import numpy as np
import torch
from scipy.special import ndtri


def _unit_offsets(n_s: int, uniform: bool) -> np.ndarray:
    levels = (np.arange(n_s) + 0.5) / n_s
    if uniform:
        return -2.0 + 4.0 * levels
    return ndtri(levels)


def sample_inverse_cdf(mean: float, variance: float, n_s: int, uniform: bool = False,
                       min_range: float | None = 0.02, max_range: float | None = 4.0) -> np.ndarray:
    """Sorted depth hypotheses for one zone.

    By default these are the quantiles of N(mean, variance) at probability
    levels ``(i + 0.5) / n_s``; with ``uniform`` they are spread evenly over
    ``mean ± 2 sigma`` instead. Pass ``None`` bounds to skip clamping.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if n_s < 1:
        raise ValueError("n_s must be at least 1")
    samples = mean + np.sqrt(variance) * _unit_offsets(n_s, uniform)
    if variance == 0:
        samples = np.full(n_s, float(mean))
    if min_range is not None or max_range is not None:
        samples = np.clip(samples, min_range, max_range)
    return samples


def sample_zones(means: torch.Tensor, variances: torch.Tensor, n_s: int, uniform: bool,
                 d_min: float, d_max: float) -> torch.Tensor:
    """Batched :func:`sample_inverse_cdf`: (...,) means -> (..., n_s) clamped hypotheses."""
    offsets = torch.as_tensor(_unit_offsets(n_s, uniform), dtype=means.dtype, device=means.device)
    sigma = variances.clamp_min(0).sqrt()
    return (means.unsqueeze(-1) + sigma.unsqueeze(-1) * offsets).clamp(d_min, d_max)
