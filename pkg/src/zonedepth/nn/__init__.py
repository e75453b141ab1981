"""Fusion network: distribution sampling and encoding, image pyramid,
patch-constrained attention fusion and a bin-based depth head."""

from .attention import MultiHeadAttention, attention, sinusoidal_2d
from .encoders import DistributionEncoder, ImageEncoder, encode_distribution
from .head import BinHead, BinPrediction, bins_to_depth, predict_bins
from .model import FusionConfig, ModelInput, ZoneFusionNet
from .patches import interpolate_patch, scatter_patch_back
from .sampling import sample_inverse_cdf, sample_zones
from .tensor import backward

__all__ = [
    "BinHead", "BinPrediction", "DistributionEncoder", "FusionConfig", "ImageEncoder", "ModelInput",
    "MultiHeadAttention", "ZoneFusionNet", "attention", "backward", "bins_to_depth", "encode_distribution",
    "interpolate_patch", "predict_bins", "sample_inverse_cdf", "sample_zones", "scatter_patch_back",
    "sinusoidal_2d",
]
