"""Procedural indoor scenes rendered for both the RGB camera and the ToF sensor.

World coordinates are the RGB camera frame (x right, y down, z forward).
Surfaces are ray-cast for each camera from the same primitive list, so the
two depth rasters and the zone readings are mutually consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry import CameraIntrinsics, DepthMap, Extrinsics
from ..sensor import SensorConfig, ZoneGrid, simulate_zone_grid

DEFAULT_RGB = CameraIntrinsics.from_fov(64, 48, math.radians(55.0), math.radians(43.0))
DEFAULT_EXTRINSICS = Extrinsics.from_axis_angle(np.radians([0.6, -0.8, 0.3]), [-0.02, 0.005, 0.0])


@dataclass(frozen=True)
class PlanePrim:
    normal: tuple
    offset: float
    color: tuple = (0.7, 0.7, 0.7)
    texture: str = "checker"
    frequency: float = 2.0

    def intersect(self, o, d):
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        denom = d @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -(o @ n + self.offset / np.linalg.norm(self.normal)) / denom
        t = np.where((np.abs(denom) > 1e-12) & (t > 1e-6), t, np.inf)
        return t, np.broadcast_to(n, d.shape)


@dataclass(frozen=True)
class BoxPrim:
    center: tuple
    half_size: tuple
    yaw: float = 0.0
    color: tuple = (0.6, 0.4, 0.3)
    texture: str = "stripes"
    frequency: float = 4.0

    def intersect(self, o, d):
        R = Rotation.from_rotvec([0.0, self.yaw, 0.0]).as_matrix()
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.half_size, dtype=float)
        lo_ = (np.broadcast_to(o, d.shape) - c) @ R  # box-local origin
        ld = d @ R
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - lo_) / ld
            t2 = (h - lo_) / ld
        t1 = np.where(ld == 0, np.where(np.abs(lo_) <= h, -np.inf, np.inf), t1)
        t2 = np.where(ld == 0, np.where(np.abs(lo_) <= h, np.inf, -np.inf), t2)
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        t_near = tmin.max(axis=1)
        t_far = tmax.min(axis=1)
        axis = tmin.argmax(axis=1)
        hit = (t_near <= t_far) & (t_near > 1e-6)
        t = np.where(hit, t_near, np.inf)
        local_n = np.zeros_like(ld)
        rows = np.arange(len(ld))
        local_n[rows, axis] = -np.sign(ld[rows, axis])
        return t, local_n @ R.T


@dataclass(frozen=True)
class SpherePrim:
    center: tuple
    radius: float
    color: tuple = (0.3, 0.5, 0.7)
    texture: str = "flat"
    frequency: float = 6.0

    def intersect(self, o, d):
        c = np.asarray(self.center, dtype=float)
        oc = np.broadcast_to(o, d.shape) - c
        a = np.einsum("ij,ij->i", d, d)
        b = 2 * np.einsum("ij,ij->i", oc, d)
        cc = np.einsum("ij,ij->i", oc, oc) - self.radius ** 2
        disc = b * b - 4 * a * cc
        sq = np.sqrt(np.maximum(disc, 0))
        t = (-b - sq) / (2 * a)
        t = np.where((disc >= 0) & (t > 1e-6), t, np.inf)
        with np.errstate(invalid="ignore"):
            p = np.broadcast_to(o, d.shape) + t[:, None] * d
            n = (p - c) / self.radius
        return t, n


@dataclass(frozen=True)
class SceneSpec:
    """Scene recipe. With ``primitives=None`` a random room is drawn from ``seed``."""

    seed: int = 0
    primitives: tuple | None = None
    max_boxes: int = 3
    max_spheres: int = 2
    texture_mode: str = "mixed"  # mixed | checker | stripes | flat
    K_rgb: CameraIntrinsics = DEFAULT_RGB
    extrinsics: Extrinsics = DEFAULT_EXTRINSICS  # RGB frame -> ToF frame
    sensor: SensorConfig = field(default_factory=SensorConfig)
    light_dir: tuple | None = None
    max_attempts: int = 20


@dataclass
class Scene:
    rgb: np.ndarray  # (H, W, 3) in [0, 1], quantized to 8 bits
    depth_rgb: DepthMap
    depth_tof: DepthMap
    zones: ZoneGrid
    spec: SceneSpec
    primitives: tuple


def _texture(kind: str, freq: float, p: np.ndarray) -> np.ndarray:
    if kind == "checker":
        parity = np.floor(p[:, 0] * freq) + np.floor(p[:, 1] * freq) + np.floor(p[:, 2] * freq)
        return np.where(parity % 2 == 0, 1.0, 0.55)
    if kind == "stripes":
        return 0.75 + 0.25 * np.sin(2 * np.pi * freq * (p[:, 0] + 0.5 * p[:, 2]))
    return np.ones(len(p))


def _pick_texture(rng, mode):
    return str(rng.choice(["checker", "stripes", "flat"])) if mode == "mixed" else mode


def random_primitives(rng: np.random.Generator, spec: SceneSpec) -> tuple:
    """A yawed box room with a few boxes and spheres resting on the floor."""
    yaw = rng.uniform(-0.5, 0.5)
    Ry = Rotation.from_rotvec([0.0, yaw, 0.0]).as_matrix()
    cam_height = rng.uniform(0.7, 1.5)
    back = rng.uniform(2.5, 4.5)
    half_width = rng.uniform(1.4, 2.6)
    ceiling = rng.uniform(2.4, 3.0)
    tm = spec.texture_mode

    def wall(n_local, dist):
        n = Ry @ np.asarray(n_local, dtype=float)
        return PlanePrim(tuple(n), float(-dist), tuple(rng.uniform(0.35, 0.95, 3)), _pick_texture(rng, tm),
                         float(rng.uniform(1.0, 3.0)))

    prims = [
        PlanePrim((0.0, 1.0, 0.0), -cam_height, tuple(rng.uniform(0.3, 0.8, 3)), _pick_texture(rng, tm),
                  float(rng.uniform(1.0, 3.0))),  # floor at y = +cam_height
        PlanePrim((0.0, -1.0, 0.0), -(ceiling - cam_height), tuple(rng.uniform(0.6, 1.0, 3)), "flat"),
        wall((0.0, 0.0, 1.0), back),
        wall((1.0, 0.0, 0.0), half_width + rng.uniform(-0.3, 0.3)),
        wall((-1.0, 0.0, 0.0), half_width + rng.uniform(-0.3, 0.3)),
    ]
    for _ in range(rng.integers(0, spec.max_boxes + 1)):
        hs = rng.uniform([0.15, 0.15, 0.15], [0.6, 0.7, 0.5])
        x = rng.uniform(-1.2, 1.2)
        z = rng.uniform(1.2, back - 0.5)
        c = Ry @ np.array([x, 0.0, z])
        c[1] = cam_height - hs[1]
        prims.append(BoxPrim(tuple(c), tuple(hs), float(rng.uniform(-0.8, 0.8)),
                             tuple(rng.uniform(0.2, 0.95, 3)), _pick_texture(rng, tm), float(rng.uniform(2.0, 8.0))))
    for _ in range(rng.integers(0, spec.max_spheres + 1)):
        r = rng.uniform(0.15, 0.45)
        c = Ry @ np.array([rng.uniform(-1.2, 1.2), 0.0, rng.uniform(1.2, back - 0.5)])
        c[1] = cam_height - r
        prims.append(SpherePrim(tuple(c), float(r), tuple(rng.uniform(0.2, 0.95, 3)), _pick_texture(rng, tm),
                                float(rng.uniform(3.0, 9.0))))
    return tuple(prims)


def ray_cast(primitives, origin: np.ndarray, dirs: np.ndarray):
    """Nearest hit per ray. ``dirs`` (N, 3) need not be unit length.

    Returns ``(t, normal, prim_index)``; ``t`` is in units of ``dirs`` and is
    inf (index -1) for rays that miss everything.
    """
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_n = np.zeros((n, 3))
    best_i = np.full(n, -1)
    for i, prim in enumerate(primitives):
        t, normal = prim.intersect(origin, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_n = np.where(closer[:, None], normal, best_n)
        best_i = np.where(closer, i, best_i)
    return best_t, best_n, best_i


def render_depth(primitives, K: CameraIntrinsics, cam_from_world: Extrinsics) -> DepthMap:
    """z-depth raster of the scene seen by a camera with pose ``cam_from_world``."""
    world_from_cam = cam_from_world.inverse()
    rays = K.pixel_rays().reshape(-1, 3)
    t, _, _ = ray_cast(primitives, world_from_cam.translation, rays @ world_from_cam.rotation.T)
    depth = t.reshape(K.height, K.width)
    return DepthMap(np.where(np.isfinite(depth), depth, np.nan))


def shade(primitives, K: CameraIntrinsics, light_dir) -> tuple[np.ndarray, DepthMap]:
    """Lambert-shaded, textured RGB image and depth seen from the world origin."""
    rays = K.pixel_rays().reshape(-1, 3)
    t, normal, idx = ray_cast(primitives, np.zeros(3), rays)
    hit = np.isfinite(t)
    p = rays * np.where(hit, t, 0.0)[:, None]
    facing = np.where((np.einsum("ij,ij->i", normal, rays) > 0)[:, None], -normal, normal)
    light = np.asarray(light_dir, dtype=float)
    light = light / np.linalg.norm(light)
    lambert = 0.3 + 0.7 * np.clip(facing @ -light, 0.0, 1.0)
    rgb = np.zeros((len(rays), 3))
    for i, prim in enumerate(primitives):
        sel = idx == i
        if sel.any():
            tex = _texture(prim.texture, prim.frequency, p[sel])
            rgb[sel] = np.asarray(prim.color)[None, :] * (tex * lambert[sel])[:, None]
    rgb = np.round(np.clip(rgb, 0, 1) * 255) / 255
    depth = np.where(hit, t, np.nan).reshape(K.height, K.width)
    return rgb.reshape(K.height, K.width, 3), DepthMap(depth)


def generate_scene(spec: SceneSpec) -> Scene:
    """Render RGB, both depth rasters and the zone grid for one scene.

    Random scenes are redrawn (from the same seeded stream) until at least half
    of the RGB pixels fall inside the sensor range.
    """
    rng = np.random.default_rng(spec.seed)
    K_tof = spec.sensor.tof_intrinsics()
    for _ in range(spec.max_attempts):
        prims = spec.primitives if spec.primitives is not None else random_primitives(rng, spec)
        light = spec.light_dir if spec.light_dir is not None else (
            rng.uniform(-0.6, 0.6), rng.uniform(0.4, 1.0), rng.uniform(0.3, 1.0))
        rgb, depth_rgb = shade(prims, spec.K_rgb, light)
        if not depth_rgb.valid.any():
            raise ValueError("scene is empty: no surface is visible from the RGB camera")
        d = depth_rgb.values
        in_range = depth_rgb.valid & (d >= spec.sensor.min_range) & (d <= spec.sensor.max_range)
        if in_range.mean() >= 0.5 or spec.primitives is not None:
            break
    else:
        raise ValueError(f"could not draw a scene within sensor range in {spec.max_attempts} attempts")
    depth_tof = render_depth(prims, K_tof, spec.extrinsics)
    zones = simulate_zone_grid(depth_tof, K_tof, spec.sensor)
    return Scene(rgb, depth_rgb, depth_tof, zones, spec, prims)
