"""Synthetic planar calibration captures: zone readings of a plane plus RGB-frame points on it."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, Extrinsics, Plane
from .io import write_json
from .sensor import SensorConfig, ZoneGrid, simulate_zone_grid


def plane_in_frame(plane: Plane, e: Extrinsics) -> Plane:
    """The plane expressed in the target frame of ``e`` (``p' = R p + t``)."""
    n = e.rotation @ plane.normal
    return Plane(n, plane.offset - n @ e.translation)


def render_plane(plane: Plane, K: CameraIntrinsics) -> DepthMap:
    depth = plane.depth_along_rays(K.pixel_rays())
    return DepthMap(np.where(np.isfinite(depth) & (depth > 0), depth, np.nan))


def planar_capture(plane_rgb: Plane, e: Extrinsics, K_rgb: CameraIntrinsics, cfg: SensorConfig = SensorConfig(),
                   n_points: int = 200, depth_noise: float = 0.0, rng=None) -> tuple[ZoneGrid, np.ndarray]:
    """Zone grid the sensor would report for ``plane_rgb`` and ``n_points`` RGB-frame points on it.

    ``depth_noise`` (meters, std) perturbs the ToF raster before zone binning.
    """
    rng = np.random.default_rng(rng)
    K_tof = cfg.tof_intrinsics()
    depth = render_plane(plane_in_frame(plane_rgb, e), K_tof)
    if depth_noise > 0:
        depth = DepthMap(depth.values + rng.normal(0.0, depth_noise, depth.values.shape), depth.valid)
    zones = simulate_zone_grid(depth, K_tof, cfg)

    rgb_depth = render_plane(plane_rgb, K_rgb)
    ys, xs = np.nonzero(rgb_depth.valid)
    if len(xs) == 0:
        raise ValueError("plane is not visible from the RGB camera")
    pick = rng.choice(len(xs), size=min(n_points, len(xs)), replace=False)
    rays = K_rgb.pixel_rays()[ys[pick], xs[pick]]
    points = rays * rgb_depth.values[ys[pick], xs[pick]][:, None]
    return zones, points


def write_capture(folder, zones: ZoneGrid, points: np.ndarray) -> Path:
    folder = Path(folder)
    write_json(folder / "zones.json", zones.to_dict())
    write_json(folder / "points.json", np.asarray(points).tolist())
    return folder
