"""RGB-to-ToF extrinsic calibration from planar scenes.

Two stages: an EM-style plane fit that recovers a plane (and one in-zone
anchor pixel per zone) from the zone means alone, then a point-to-plane
Gauss-Newton solve for the rigid transform using metric RGB-frame points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConvergenceError, DegenerateGeometryError, UnobservableError
from .geometry import CameraIntrinsics, Extrinsics, Plane, Rect, back_project, fit_plane_least_squares
from .sensor import ZoneGrid, zone_bounds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    outlier_threshold: float = 0.05

    def __post_init__(self):
        if self.max_iterations <= 0 or self.convergence_tol <= 0 or self.outlier_threshold <= 0:
            raise ValueError("EM settings must be positive")


@dataclass
class PlaneFitResult:
    plane: Plane
    anchor_points: np.ndarray  # (rows*cols, 2); NaN for invalid zones
    inlier_mask: np.ndarray  # (rows*cols,)
    rms_residual: float
    iterations: int
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class CalibrationFrame:
    plane: Plane  # ToF frame
    points: np.ndarray  # (N, 3), RGB frame

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise ValueError("calibration frame has no points")
        object.__setattr__(self, "points", pts)


def _residual_coefficients(m: float, plane: Plane, K: CameraIntrinsics) -> tuple[float, float, float]:
    """``a, b, c`` with ``n · back_project(x, y, m) + d = a x + b y + c``."""
    nx, ny, nz = plane.normal
    a = nx * m / K.fx
    b = ny * m / K.fy
    c = -a * K.cx - b * K.cy + nz * m + plane.offset
    return a, b, c


def mstep_anchor(zone_rect: Rect, m_k: float, plane: Plane, K_tof: CameraIntrinsics,
                 prev: tuple[float, float]) -> tuple[float, float]:
    """Point of ``zone_rect`` minimizing the plane residual at depth ``m_k``.

    The residual is affine in pixel coordinates, so the box-constrained
    minimizer of its magnitude is found in closed form. Among equally good
    points the one closest to ``prev`` wins.
    """
    a, b, c = _residual_coefficients(m_k, plane, K_tof)
    px, py = prev
    x0, y0, x1, y1 = zone_rect.as_tuple()
    if a == 0.0 and b == 0.0:
        return (px, py)

    corner_vals = [a * x + b * y + c for x in (x0, x1) for y in (y0, y1)]
    lo, hi = min(corner_vals), max(corner_vals)
    if lo <= 0.0 <= hi:
        # zero line crosses the rect: nearest point of the clipped segment to prev
        g2 = a * a + b * b
        r_prev = a * px + b * py + c
        fx, fy = px - r_prev * a / g2, py - r_prev * b / g2
        ux, uy = -b, a
        s_lo, s_hi = -np.inf, np.inf
        for u, f, lo_b, hi_b in ((ux, fx, x0, x1), (uy, fy, y0, y1)):
            if u == 0.0:
                continue
            s0, s1 = (lo_b - f) / u, (hi_b - f) / u
            s_lo, s_hi = max(s_lo, min(s0, s1)), min(s_hi, max(s0, s1))
        s = 0.0 if s_lo > s_hi else min(max(0.0, s_lo), s_hi)
        x = min(max(fx + s * ux, x0), x1)
        y = min(max(fy + s * uy, y0), y1)
        return (x, y)

    # one sign everywhere: push each coordinate toward the side that shrinks |r|
    sign = 1.0 if lo > 0 else -1.0

    def pick(coef, lo_b, hi_b, p):
        if coef * sign > 0:
            return lo_b
        if coef * sign < 0:
            return hi_b
        return min(max(p, lo_b), hi_b)

    return (pick(a, x0, x1, px), pick(b, y0, y1, py))


def _zone_residuals(plane: Plane, anchors: np.ndarray, means: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    pts = back_project(anchors[:, 0], anchors[:, 1], means, K)
    return pts @ plane.normal + plane.offset


def fit_plane_em(zones: ZoneGrid, K_tof: CameraIntrinsics, cfg: EmConfig = EmConfig()) -> PlaneFitResult:
    """Fit a plane to zone means when the pixel behind each mean is unknown.

    Alternates a least-squares plane fit through back-projected anchors with a
    per-zone anchor update confined to the zone rectangle. Zones whose residual
    exceeds ``cfg.outlier_threshold`` after a plane fit are dropped for good.
    """
    valid = zones.valid.ravel()
    idx = np.flatnonzero(valid)
    if len(idx) < 3:
        raise DegenerateGeometryError(f"only {len(idx)} valid zones")
    means_all = zones.means.ravel()
    rects = [zone_bounds(divmod(int(k), zones.cols), K_tof, zones) for k in idx]
    means = means_all[idx]
    anchors = np.array([r.center for r in rects], dtype=float)
    inliers = np.ones(len(idx), dtype=bool)

    history = []
    plane = None
    rms = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        # E-step with outlier rejection, refit until the inlier set is stable
        while True:
            if inliers.sum() < 3:
                raise DegenerateGeometryError("fewer than 3 inlier zones survive")
            sel = inliers
            plane = fit_plane_least_squares(back_project(anchors[sel, 0], anchors[sel, 1], means[sel], K_tof))
            res = np.abs(_zone_residuals(plane, anchors, means, K_tof))
            outliers = inliers & (res > cfg.outlier_threshold)
            if not outliers.any():
                break
            inliers = inliers & ~outliers

        # M-step
        for j in np.flatnonzero(inliers):
            anchors[j] = mstep_anchor(rects[j], means[j], plane, K_tof, tuple(anchors[j]))

        res = _zone_residuals(plane, anchors[inliers], means[inliers], K_tof)
        new_rms = float(np.sqrt(np.mean(res ** 2)))
        history.append(new_rms)
        converged = abs(rms - new_rms) < cfg.convergence_tol
        rms = new_rms
        if converged:
            break

    full_anchors = np.full((len(valid), 2), np.nan)
    full_anchors[idx] = anchors
    full_inliers = np.zeros(len(valid), dtype=bool)
    full_inliers[idx] = inliers
    return PlaneFitResult(plane, full_anchors, full_inliers, rms, iterations, history)


def _cost(frames, R, t) -> float:
    return float(sum(np.sum((f.points @ R.T @ f.plane.normal + t @ f.plane.normal + f.plane.offset) ** 2)
                     for f in frames))


def _check_observability(frames) -> None:
    normals = np.array([f.plane.normal for f in frames])
    scatter = normals.T @ normals
    evals = np.linalg.eigvalsh(scatter)
    if evals[0] <= 1e-6 * evals[-1]:
        raise UnobservableError("plane normals span fewer than 3 directions; translation is unconstrained")


def solve_extrinsics(frames: list[CalibrationFrame], init: Extrinsics | None = None,
                     max_iterations: int = 100, gradient_tol: float = 1e-10) -> Extrinsics:
    """Rigid transform minimizing ``sum (n_i · (R p + t) + d_i)^2`` over all frames.

    Gauss-Newton on a left-multiplied axis-angle increment plus a translation
    increment, with Levenberg damping raised tenfold whenever a step would
    increase the cost.
    """
    if not frames:
        raise ValueError("no calibration frames")
    if sum(len(f.points) for f in frames) < 6:
        raise ValueError("need at least 6 points in total")
    _check_observability(frames)

    init = init or Extrinsics.identity()
    R, t = init.rotation.copy(), init.translation.copy()
    cost = _cost(frames, R, t)
    damping = 0.0
    for it in range(max_iterations):
        JtJ = np.zeros((6, 6))
        Jtr = np.zeros(6)
        for f in frames:
            n = f.plane.normal
            q = f.points @ R.T
            r = q @ n + t @ n + f.plane.offset
            J = np.empty((len(q), 6))
            J[:, :3] = np.cross(q, n)
            J[:, 3:] = n
            JtJ += J.T @ J
            Jtr += J.T @ r
        if np.linalg.norm(Jtr) < gradient_tol:
            return Extrinsics(R, t)

        while True:
            A = JtJ + damping * np.diag(np.diag(JtJ))
            try:
                delta = -np.linalg.solve(A, Jtr)
            except np.linalg.LinAlgError:
                raise UnobservableError("normal equations are singular") from None
            R_new = Rotation.from_rotvec(delta[:3]).as_matrix() @ R
            # re-orthonormalize against drift
            u, _, vt = np.linalg.svd(R_new)
            R_new = u @ vt
            t_new = t + delta[3:]
            new_cost = _cost(frames, R_new, t_new)
            if new_cost <= cost:
                break
            damping = max(1e-6, damping * 10.0)
            if damping > 1e12:
                # no descent direction left at machine precision
                return Extrinsics(R, t)
        step = np.linalg.norm(delta)
        R, t, cost = R_new, t_new, new_cost
        damping = damping / 10.0 if damping > 1e-6 else 0.0
        log.debug("gn iter %d cost %.3e step %.3e", it, cost, step)
        if step < 1e-14:
            return Extrinsics(R, t)

    raise ConvergenceError(
        f"extrinsic solve did not converge in {max_iterations} iterations",
        {"cost": cost, "gradient_norm": float(np.linalg.norm(Jtr)), "damping": damping},
    )


def calibration_report(frames: list[CalibrationFrame], e: Extrinsics) -> dict:
    """Mean absolute point-plane distance before (identity) and after applying ``e``."""
    if not frames:
        raise ValueError("no calibration frames")

    def mean_distance(ext: Extrinsics) -> float:
        d = np.concatenate([np.abs(ext.apply(f.points) @ f.plane.normal + f.plane.offset) for f in frames])
        return float(d.mean())

    return {
        "mean_distance_before": mean_distance(Extrinsics.identity()),
        "mean_distance_after": mean_distance(e),
    }
