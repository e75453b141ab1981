"""Depth metrics, flat-target bias/jitter and the nearest-zone baseline.

Metric conventions (over pixels with valid ground truth):

* delta_i: fraction with ``max(pred/gt, gt/pred) < 1.25**i``
* rel: mean ``|pred - gt| / gt``
* rmse: ``sqrt(mean((pred - gt)**2))``
* log10: mean ``|log10 pred - log10 gt|``
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateGeometryError, NoValidPixelsError
from .geometry import CameraIntrinsics, DepthMap, Plane, Rect, back_project, fit_plane_least_squares
from .sensor import ZoneGrid

REPORT_SCHEMA = 1


@dataclass(frozen=True)
class MetricReport:
    delta1: float
    delta2: float
    delta3: float
    rel: float
    rmse: float
    log10: float
    pixel_count: int

    def to_dict(self) -> dict:
        return {"schema": REPORT_SCHEMA, **asdict(self)}


@dataclass(frozen=True)
class PlaneEvalReport:
    distance: float  # mean depth of the fitted plane over the region
    bias: float
    jitter: float
    frames: int

    def to_dict(self) -> dict:
        return {"schema": REPORT_SCHEMA, **asdict(self)}


def _as_depth(d) -> DepthMap:
    return d if isinstance(d, DepthMap) else DepthMap(np.asarray(d, dtype=float))


def compute_metrics(pred, gt) -> MetricReport:
    """Standard monocular-depth metrics over the valid ground-truth pixels.

    Prediction pixels that are not strictly positive and finite count as failures
    for the delta thresholds and are clamped to a tiny depth for the error terms.
    """
    pred, gt = _as_depth(pred), _as_depth(gt)
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"shape mismatch: pred {pred.values.shape} vs gt {gt.values.shape}")
    mask = gt.valid
    n = int(mask.sum())
    if n == 0:
        raise NoValidPixelsError("ground truth has no valid pixels")
    d = gt.values[mask]
    p = np.nan_to_num(pred.values[mask], nan=1e-6, posinf=1e6)
    p = np.maximum(p, 1e-6)
    ratio = np.maximum(p / d, d / p)
    deltas = [float(np.mean(ratio < 1.25 ** i)) for i in (1, 2, 3)]
    return MetricReport(
        delta1=deltas[0],
        delta2=deltas[1],
        delta3=deltas[2],
        rel=float(np.mean(np.abs(p - d) / d)),
        rmse=float(np.sqrt(np.mean((p - d) ** 2))),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(d)))),
        pixel_count=n,
    )


def robust_plane_fit(points: np.ndarray, rounds: int = 2, k_sigma: float = 3.0) -> tuple[Plane, np.ndarray]:
    """Least-squares plane refit ``rounds`` times after dropping points beyond ``k_sigma`` std."""
    points = np.asarray(points, dtype=float)
    keep = np.ones(len(points), dtype=bool)
    plane = fit_plane_least_squares(points)
    for _ in range(rounds):
        r = points @ plane.normal + plane.offset
        sigma = r[keep].std()
        new_keep = np.abs(r - r[keep].mean()) <= k_sigma * sigma if sigma > 0 else keep
        if new_keep.sum() < 3:
            raise DegenerateGeometryError("outlier rejection left fewer than 3 points")
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
        plane = fit_plane_least_squares(points[keep])
    return plane, keep


def _region_pixels(region: Rect, K: CameraIntrinsics):
    x0, y0 = max(int(np.floor(region.x_min)), 0), max(int(np.floor(region.y_min)), 0)
    x1, y1 = min(int(np.ceil(region.x_max)), K.width), min(int(np.ceil(region.y_max)), K.height)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("region does not overlap the image")
    return slice(y0, y1), slice(x0, x1)


def plane_bias_jitter(preds, K: CameraIntrinsics, region: Rect, reference: Plane | None = None) -> PlaneEvalReport:
    """Accuracy and noise of predicted depth on a static flat target.

    The target plane is fitted robustly to the back-projected predictions of all
    frames unless a ``reference`` plane (e.g. from a physical measurement) is
    given. A fit to the predictions absorbs any constant depth offset, so a
    reference is needed to see a bias that is uniform over the region.
    Bias is the mean absolute and jitter the standard deviation of the signed
    per-pixel depth error along each pixel ray.
    """
    preds = [_as_depth(p) for p in preds]
    if len(preds) < 2:
        raise ValueError("need at least 2 frames of the target")
    rows, cols = _region_pixels(region, K)
    rays = K.pixel_rays()[rows, cols]
    ys, xs = np.mgrid[rows, cols]
    xs, ys = xs + 0.5, ys + 0.5
    depths, pix_rays, points = [], [], []
    for p in preds:
        m = p.valid[rows, cols]
        d = p.values[rows, cols][m]
        depths.append(d)
        pix_rays.append(rays[m])
        points.append(back_project(xs[m], ys[m], d, K))
    depths = np.concatenate(depths)
    pix_rays = np.concatenate(pix_rays)
    if len(depths) < 3:
        raise DegenerateGeometryError("fewer than 3 valid pixels in the region")
    if reference is None:
        plane, _ = robust_plane_fit(np.concatenate(points))
    else:
        plane = reference
    plane_depth = plane.depth_along_rays(pix_rays)
    err = depths - plane_depth
    return PlaneEvalReport(
        distance=float(np.mean(plane.depth_along_rays(rays.reshape(-1, 3)))),
        bias=float(np.mean(np.abs(err))),
        jitter=float(np.std(err)),
        frames=len(preds),
    )


def baseline_nearest_zone(zones: ZoneGrid, footprints, size: tuple[int, int]) -> DepthMap:
    """Piecewise-constant depth: each pixel takes the mean of the zone whose footprint contains it.

    ``footprints`` is a sequence of rects (``Rect``, 4-tuples or an (Z, 4) array,
    NaN or None where undefined) in row-major zone order; ``size`` is
    ``(height, width)``. Pixels inside several footprints take the one whose
    centre is nearest; pixels outside all footprints take the nearest footprint
    (by distance to its box).
    """
    h, w = size
    means = zones.means.ravel()
    valid = zones.valid.ravel()
    boxes, values = [], []
    for k, fp in enumerate(footprints):
        if fp is None or not valid[k]:
            continue
        box = np.asarray(fp.as_tuple() if isinstance(fp, Rect) else fp, dtype=float)
        if not np.all(np.isfinite(box)):
            continue
        boxes.append(box)
        values.append(means[k])
    if not boxes:
        raise ValueError("no valid zone with a footprint")
    boxes = np.array(boxes)
    values = np.array(values)
    ys, xs = np.mgrid[0:h, 0:w] + 0.5
    px = xs.reshape(-1, 1)
    py = ys.reshape(-1, 1)
    dx = np.maximum(np.maximum(boxes[:, 0] - px, px - boxes[:, 2]), 0)
    dy = np.maximum(np.maximum(boxes[:, 1] - py, py - boxes[:, 3]), 0)
    outside = np.hypot(dx, dy)
    cx = 0.5 * (boxes[:, 0] + boxes[:, 2])
    cy = 0.5 * (boxes[:, 1] + boxes[:, 3])
    centre = np.hypot(px - cx, py - cy)
    # lexicographic: box distance first, centre distance breaks ties between containing boxes
    score = outside * 1e6 + centre
    return DepthMap(values[np.argmin(score, axis=1)].reshape(h, w))


def mean_report(reports) -> MetricReport:
    """Average of per-image reports; pixel counts are summed."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    keys = ("delta1", "delta2", "delta3", "rel", "rmse", "log10")
    avg = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    return MetricReport(**avg, pixel_count=int(sum(r.pixel_count for r in reports)))
