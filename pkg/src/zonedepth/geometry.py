"""Pinhole cameras, rigid transforms, planes and depth rasters.

Conventions: meters and radians throughout; pixel coordinates are continuous
with pixel ``(row, col)`` centered at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import BehindCameraError, DegenerateGeometryError


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, fov_h: float, fov_v: float) -> "CameraIntrinsics":
        """Centered pinhole camera with the given horizontal/vertical field of view (radians)."""
        fx = (width / 2) / math.tan(fov_h / 2)
        fy = (height / 2) / math.tan(fov_v / 2)
        return cls(fx, fy, width / 2, height / 2, width, height)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def fov_h(self) -> float:
        return 2 * math.atan(self.width / (2 * self.fx))

    @property
    def fov_v(self) -> float:
        return 2 * math.atan(self.height / (2 * self.fy))

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics of the same camera on an image resized by ``factor``."""
        return CameraIntrinsics(
            self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor,
            int(round(self.width * factor)), int(round(self.height * factor)),
        )

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) rays ``K^-1 (x, y, 1)`` through every pixel center."""
        xs = np.arange(self.width) + 0.5
        ys = np.arange(self.height) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([(gx - self.cx) / self.fx, (gy - self.cy) / self.fy, np.ones_like(gx)], axis=-1)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class Extrinsics:
    """Rigid transform ``p' = rotation @ p + translation`` (RGB frame to ToF frame by convention)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, rotvec, translation) -> "Extrinsics":
        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix(), translation)

    def inverse(self) -> "Extrinsics":
        Rt = self.rotation.T
        return Extrinsics(Rt, -Rt @ self.translation)

    def compose(self, other: "Extrinsics") -> "Extrinsics":
        """``self ∘ other``: apply ``other`` first."""
        return Extrinsics(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def rotation_angle_to(self, other: "Extrinsics") -> float:
        """Angle (radians) of the relative rotation between two transforms."""
        rel = self.rotation.T @ other.rotation
        c = np.clip((np.trace(rel) - 1) / 2, -1.0, 1.0)
        return float(np.arccos(c))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Extrinsics":
        return cls(np.array(d["rotation"], dtype=float), np.array(d["translation"], dtype=float))


@dataclass(frozen=True)
class Plane:
    """Points ``p`` with ``normal · p + offset = 0``; the normal is stored unit length."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.array(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("plane normal must be non-zero")
        n = n / norm
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def canonical(self) -> "Plane":
        """Same plane with the sign chosen so that ``offset <= 0``."""
        if self.offset > 0:
            return Plane(-self.normal, -self.offset)
        return self

    def depth_along_rays(self, rays: np.ndarray) -> np.ndarray:
        """z-depth where rays ``(x, y, 1)`` from the origin meet the plane (inf if parallel)."""
        denom = np.asarray(rays) @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(denom) > 1e-15, -self.offset / denom, np.inf)

    def angle_to(self, other: "Plane") -> float:
        """Angle between the two normals, ignoring orientation."""
        c = abs(float(self.normal @ other.normal))
        return float(np.arccos(min(1.0, c)))

    def to_dict(self) -> dict:
        return {"normal": self.normal.tolist(), "offset": self.offset}

    @classmethod
    def from_dict(cls, d: dict) -> "Plane":
        return cls(np.array(d["normal"], dtype=float), float(d["offset"]))


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate rect {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, x: float, y: float, tol: float = 0.0) -> bool:
        return (self.x_min - tol <= x <= self.x_max + tol) and (self.y_min - tol <= y <= self.y_max + tol)

    def scaled(self, factor: float) -> "Rect":
        return Rect(self.x_min * factor, self.y_min * factor, self.x_max * factor, self.y_max * factor)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Metric z-depth raster with a validity mask, stored as (height, width) arrays."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("depth values must be a 2-D array")
        if self.valid is None:
            m = np.isfinite(v) & (v > 0)
        else:
            m = np.array(self.valid, dtype=bool)
            if m.shape != v.shape:
                raise ValueError(f"mask shape {m.shape} does not match depth shape {v.shape}")
            if np.any(~(v[m] > 0)):
                raise ValueError("valid depths must be positive")
        v.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def filled(self, fill: float = np.nan) -> np.ndarray:
        return np.where(self.valid, self.values, fill)


def back_project(x, y, depth, K: CameraIntrinsics) -> np.ndarray:
    """Pixel ``(x, y)`` at z-depth ``depth`` to a camera-frame point.

    Accepts scalars or broadcastable arrays; returns (..., 3).
    """
    x, y, depth = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, depth)))
    if np.any(~(depth > 0)):
        raise ValueError("depth must be positive")
    return np.stack([(x - K.cx) / K.fx * depth, (y - K.cy) / K.fy * depth, depth], axis=-1)


def project(p, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point(s) (..., 3) to pixel coordinates (..., 2)."""
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(~(z > 0)):
        raise BehindCameraError("point is behind the camera")
    return np.stack([K.fx * p[..., 0] / z + K.cx, K.fy * p[..., 1] / z + K.cy], axis=-1)


def point_plane_distance(p, plane: Plane):
    """Signed distance of point(s) (..., 3) to ``plane``."""
    return np.asarray(p, dtype=float) @ plane.normal + plane.offset


def transform_point(p, e: Extrinsics) -> np.ndarray:
    return np.asarray(p, dtype=float) @ e.rotation.T + e.translation


def fit_plane_least_squares(points) -> Plane:
    """Total-least-squares plane: smallest eigenvector of the centered scatter matrix."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    evals, evecs = np.linalg.eigh(centered.T @ centered)
    # evals ascending; a line leaves only one non-negligible direction
    if evals[2] <= 0 or evals[1] <= 1e-12 * evals[2]:
        raise DegenerateGeometryError("points are collinear or coincident")
    normal = evecs[:, 0]
    return Plane(normal, -float(normal @ centroid)).canonical()
