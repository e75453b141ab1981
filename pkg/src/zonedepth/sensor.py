"""Zone-based ToF sensor model: an 8x8 grid of per-zone Gaussian depth readings."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FootprintUndefinedError
from .geometry import CameraIntrinsics, DepthMap, Extrinsics, Rect, back_project, project

DEFAULT_FOV = math.radians(45.0)


@dataclass(frozen=True)
class ZoneReading:
    mean: float
    variance: float
    valid: bool

    def __post_init__(self):
        if self.valid and not (self.mean > 0 and self.variance >= 0):
            raise ValueError(f"invalid reading for a valid zone: {self}")


INVALID_READING = ZoneReading(0.0, 0.0, False)


@dataclass(frozen=True)
class ZoneGrid:
    readings: tuple
    rows: int = 8
    cols: int = 8
    fov_h: float = DEFAULT_FOV
    fov_v: float = DEFAULT_FOV

    def __post_init__(self):
        object.__setattr__(self, "readings", tuple(self.readings))
        if len(self.readings) != self.rows * self.cols:
            raise ValueError(f"expected {self.rows * self.cols} readings, got {len(self.readings)}")

    def __getitem__(self, index: tuple[int, int]) -> ZoneReading:
        row, col = index
        return self.readings[row * self.cols + col]

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.readings]).reshape(self.rows, self.cols)

    @property
    def variances(self) -> np.ndarray:
        return np.array([r.variance for r in self.readings]).reshape(self.rows, self.cols)

    @property
    def valid(self) -> np.ndarray:
        return np.array([r.valid for r in self.readings]).reshape(self.rows, self.cols)

    @classmethod
    def from_arrays(cls, means, variances, valid, fov_h=DEFAULT_FOV, fov_v=DEFAULT_FOV) -> "ZoneGrid":
        means, variances, valid = np.asarray(means), np.asarray(variances), np.asarray(valid, dtype=bool)
        rows, cols = means.shape
        readings = [
            ZoneReading(float(m), float(v), True) if ok else INVALID_READING
            for m, v, ok in zip(means.ravel(), variances.ravel(), valid.ravel())
        ]
        return cls(tuple(readings), rows, cols, fov_h, fov_v)

    def to_dict(self) -> dict:
        zones = [
            {"mean": r.mean, "var": r.variance, "valid": True} if r.valid
            else {"mean": None, "var": None, "valid": False}
            for r in self.readings
        ]
        return {"rows": self.rows, "cols": self.cols,
                "fov_h_deg": math.degrees(self.fov_h), "fov_v_deg": math.degrees(self.fov_v),
                "zones": zones}

    @classmethod
    def from_dict(cls, d: dict) -> "ZoneGrid":
        readings = [
            ZoneReading(float(z["mean"]), float(z["var"]), True) if z["valid"] else INVALID_READING
            for z in d["zones"]
        ]
        return cls(tuple(readings), int(d["rows"]), int(d["cols"]),
                   math.radians(d.get("fov_h_deg", 45.0)), math.radians(d.get("fov_v_deg", 45.0)))


@dataclass(frozen=True)
class SensorConfig:
    min_range: float = 0.02
    max_range: float = 4.0
    min_samples_per_zone: int = 16
    rows: int = 8
    cols: int = 8
    virtual_resolution: int = 8
    fov_h_deg: float = 45.0
    fov_v_deg: float = 45.0

    def __post_init__(self):
        if not (0 < self.min_range < self.max_range):
            raise ValueError("need 0 < min_range < max_range")
        if self.min_samples_per_zone < 1:
            raise ValueError("min_samples_per_zone must be >= 1")
        if self.rows < 1 or self.cols < 1 or self.virtual_resolution < 1:
            raise ValueError("grid dimensions must be positive")

    def tof_intrinsics(self) -> CameraIntrinsics:
        """Virtual ToF raster with ``virtual_resolution`` pixels per zone side."""
        return CameraIntrinsics.from_fov(
            self.cols * self.virtual_resolution, self.rows * self.virtual_resolution,
            math.radians(self.fov_h_deg), math.radians(self.fov_v_deg),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SensorConfig":
        return cls(**d)


def _grid_shape(grid) -> tuple[int, int]:
    if grid is None:
        return 8, 8
    return grid.rows, grid.cols


def zone_bounds(zone_index: tuple[int, int], K_tof: CameraIntrinsics, grid=None) -> Rect:
    """Pixel rectangle of a zone on the ToF image plane; zones tile the image uniformly."""
    rows, cols = _grid_shape(grid)
    row, col = zone_index
    if not (0 <= row < rows and 0 <= col < cols):
        raise IndexError(f"zone {zone_index} outside a {rows}x{cols} grid")
    fov_h = getattr(grid, "fov_h", None)
    fov_v = getattr(grid, "fov_v", None)
    if fov_h is not None and (abs(K_tof.fov_h - fov_h) > 1e-6 or abs(K_tof.fov_v - fov_v) > 1e-6):
        raise ValueError("ToF intrinsics field of view does not match the zone grid")
    zw = K_tof.width / cols
    zh = K_tof.height / rows
    return Rect(col * zw, row * zh, (col + 1) * zw, (row + 1) * zh)


def all_zone_bounds(K_tof: CameraIntrinsics, grid=None) -> list[Rect]:
    rows, cols = _grid_shape(grid)
    return [zone_bounds((r, c), K_tof, grid) for r in range(rows) for c in range(cols)]


def simulate_zone_grid(gt_depth_tof: DepthMap, K_tof: CameraIntrinsics, cfg: SensorConfig = SensorConfig()) -> ZoneGrid:
    """Summarize a ToF-frame depth raster as per-zone Gaussians (moment matching).

    A pixel belongs to the zone containing its center. Depths outside
    ``[min_range, max_range]`` are excluded; zones with fewer than
    ``min_samples_per_zone`` surviving pixels are reported invalid.
    """
    if (gt_depth_tof.width, gt_depth_tof.height) != (K_tof.width, K_tof.height):
        raise ValueError(
            f"depth raster {gt_depth_tof.width}x{gt_depth_tof.height} does not match "
            f"intrinsics {K_tof.width}x{K_tof.height}"
        )
    h, w = gt_depth_tof.height, gt_depth_tof.width
    col_of = np.floor((np.arange(w) + 0.5) * cfg.cols / w).astype(int)
    row_of = np.floor((np.arange(h) + 0.5) * cfg.rows / h).astype(int)
    depth = gt_depth_tof.values
    usable = gt_depth_tof.valid & (depth >= cfg.min_range) & (depth <= cfg.max_range)

    readings = []
    for r in range(cfg.rows):
        rows_in = row_of == r
        for c in range(cfg.cols):
            block = np.ix_(rows_in, col_of == c)
            samples = depth[block][usable[block]]
            if samples.size >= cfg.min_samples_per_zone:
                readings.append(ZoneReading(float(samples.mean()), float(samples.var()), True))
            else:
                readings.append(INVALID_READING)
    return ZoneGrid(tuple(readings), cfg.rows, cfg.cols, math.radians(cfg.fov_h_deg), math.radians(cfg.fov_v_deg))


def zone_footprint_in_rgb(zone_index, K_tof: CameraIntrinsics, K_rgb: CameraIntrinsics,
                          e: Extrinsics, depth_hint: float, grid=None) -> Rect | None:
    """Bounding box, in RGB pixels, of a zone's frustum cut at ``depth_hint``.

    ``e`` maps RGB-frame points into the ToF frame. Returns ``None`` when the
    footprint falls entirely outside the RGB image.
    """
    if not depth_hint > 0:
        raise ValueError("depth_hint must be positive")
    rect = zone_bounds(zone_index, K_tof, grid)
    xs = np.array([rect.x_min, rect.x_max, rect.x_max, rect.x_min])
    ys = np.array([rect.y_min, rect.y_min, rect.y_max, rect.y_max])
    corners_rgb = e.inverse().apply(back_project(xs, ys, depth_hint, K_tof))
    if np.any(corners_rgb[:, 2] <= 0):
        raise FootprintUndefinedError(f"zone {zone_index} corner behind the RGB camera")
    uv = project(corners_rgb, K_rgb)
    x0 = max(uv[:, 0].min(), 0.0)
    x1 = min(uv[:, 0].max(), float(K_rgb.width))
    y0 = max(uv[:, 1].min(), 0.0)
    y1 = min(uv[:, 1].max(), float(K_rgb.height))
    if x1 <= x0 or y1 <= y0:
        return None
    return Rect(x0, y0, x1, y1)


def zone_footprints(zones: ZoneGrid, K_tof: CameraIntrinsics, K_rgb: CameraIntrinsics,
                    e: Extrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Footprints of every valid zone at its mean depth.

    Returns ``(rects, ok)``: an (rows*cols, 4) array of ``x_min, y_min, x_max, y_max``
    (NaN where undefined) and a boolean mask of zones with a usable footprint.
    """
    n = zones.rows * zones.cols
    rects = np.full((n, 4), np.nan)
    ok = np.zeros(n, dtype=bool)
    for k, reading in enumerate(zones.readings):
        if not reading.valid:
            continue
        try:
            fp = zone_footprint_in_rgb(divmod(k, zones.cols), K_tof, K_rgb, e, reading.mean, zones)
        except FootprintUndefinedError:
            continue
        if fp is not None:
            rects[k] = fp.as_tuple()
            ok[k] = True
    return rects, ok
