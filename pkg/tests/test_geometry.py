import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zonedepth.errors import BehindCameraError, DegenerateGeometryError
from zonedepth.geometry import (
    CameraIntrinsics, DepthMap, Extrinsics, Plane, Rect, back_project, fit_plane_least_squares,
    point_plane_distance, project, transform_point,
)


def test_back_project_principal_ray(K):
    np.testing.assert_allclose(back_project(K.cx, K.cy, 2.0, K), [0, 0, 2.0])


def test_back_project_45_degree_ray(K):
    np.testing.assert_allclose(back_project(K.cx + K.fx, K.cy, 1.0, K), [1.0, 0, 1.0])


def test_back_project_oracle(K):
    p = back_project(100, 80, 1.7, K)
    np.testing.assert_allclose(p, [0.056666666666666664, 0.11333333333333333, 1.7], atol=1e-15)
    np.testing.assert_allclose(project(p, K), [100, 80], atol=1e-12)


def test_back_project_rejects_non_positive_depth(K):
    with pytest.raises(ValueError):
        back_project(1, 1, 0.0, K)
    with pytest.raises(ValueError):
        back_project(1, 1, -1.0, K)


def test_project_center_and_oracle(K):
    np.testing.assert_allclose(project([0, 0, 3.0], K), [K.cx, K.cy])
    # inputs rounded to 4 digits, so only ~0.01 px agreement is possible
    np.testing.assert_allclose(project([0.0567, 0.1133, 1.7], K), [100, 80], atol=0.01)


def test_project_behind_camera(K):
    with pytest.raises(BehindCameraError):
        project([0, 0, -1.0], K)
    with pytest.raises(BehindCameraError):
        project([0, 0, 0.0], K)


@given(x=st.floats(0, 192), y=st.floats(0, 144), d=st.floats(0.01, 100))
def test_project_back_project_round_trip(x, y, d):
    K = CameraIntrinsics(120.0, 120.0, 96.0, 72.0, 192, 144)
    np.testing.assert_allclose(project(back_project(x, y, d, K), K), [x, y], atol=1e-9)


def test_point_plane_distance():
    pl = Plane(np.array([0, 0, 1.0]), -2.0)
    assert point_plane_distance([5, 5, 3], pl) == pytest.approx(1.0)
    assert point_plane_distance([1, -4, 2], pl) == pytest.approx(0.0)


@given(s=st.floats(-10, 10), seed=st.integers(0, 10_000))
def test_point_displaced_along_normal(s, seed):
    r = np.random.default_rng(seed)
    n = r.normal(size=3)
    pl = Plane(n, r.normal())
    base = -pl.offset * pl.normal + np.cross(pl.normal, r.normal(size=3))
    assert point_plane_distance(base + s * pl.normal, pl) == pytest.approx(s, abs=1e-9)


def test_transform_identity_and_rotation():
    p = np.array([0.3, -1.2, 4.0])
    np.testing.assert_array_equal(transform_point(p, Extrinsics.identity()), p)
    rz = Extrinsics.from_axis_angle([0, 0, math.pi / 2], [0, 0, 0])
    np.testing.assert_allclose(transform_point([1.0, 0, 0], rz), [0, 1, 0], atol=1e-15)


@given(seed=st.integers(0, 10_000))
def test_compose_then_inverse(seed):
    r = np.random.default_rng(seed)
    a = Extrinsics.from_axis_angle(r.normal(size=3), r.normal(size=3))
    b = Extrinsics.from_axis_angle(r.normal(size=3), r.normal(size=3))
    p = r.normal(size=3)
    ab = a.compose(b)
    np.testing.assert_allclose(ab.inverse().apply(ab.apply(p)), p, atol=1e-12)


def test_extrinsics_validation():
    with pytest.raises(ValueError):
        Extrinsics(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Extrinsics(np.eye(3) * 1.01, np.zeros(3))


def test_extrinsics_json_round_trip():
    e = Extrinsics.from_axis_angle([0.1, -0.2, 0.05], [0.02, 0.0, -0.01])
    back = Extrinsics.from_dict(e.to_dict())
    np.testing.assert_allclose(back.rotation, e.rotation, atol=1e-15)
    np.testing.assert_allclose(back.translation, e.translation)


def test_fit_plane_constant_z():
    pts = np.array([[0, 0, 2.0], [1, 0, 2.0], [0, 1, 2.0], [1, 1, 2.0]])
    pl = fit_plane_least_squares(pts)
    assert abs(abs(pl.normal[2]) - 1) < 1e-12
    assert pl.offset * pl.normal[2] == pytest.approx(-2.0)
    assert np.max(np.abs(pts @ pl.normal + pl.offset)) < 1e-12


def test_fit_plane_oblique(rng):
    xy = rng.uniform(-5, 5, size=(50, 2))
    pts = np.column_stack([xy, 3 - xy.sum(axis=1)])
    pl = fit_plane_least_squares(pts)
    assert np.max(np.abs(pts @ pl.normal + pl.offset)) < 1e-12
    assert pl.angle_to(Plane(np.ones(3), -3.0)) < 1e-12


def test_fit_plane_degenerate():
    with pytest.raises(DegenerateGeometryError):
        fit_plane_least_squares([[0, 0, 0], [1, 1, 1], [2, 2, 2]])
    with pytest.raises(DegenerateGeometryError):
        fit_plane_least_squares([[0, 0, 0], [1, 0, 0]])


def test_intrinsics_validation_and_fov():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 0, 0, 10, 10)
    K = CameraIntrinsics.from_fov(64, 64, math.radians(45), math.radians(45))
    assert K.fov_h == pytest.approx(math.radians(45))
    assert (K.cx, K.cy) == (32, 32)


def test_rect_and_depthmap():
    with pytest.raises(ValueError):
        Rect(2, 0, 1, 1)
    r = Rect(0, 0, 8, 4)
    assert r.center == (4, 2) and r.width == 8 and r.height == 4
    d = DepthMap(np.array([[1.0, np.nan], [0.0, 2.0]]))
    np.testing.assert_array_equal(d.valid, [[True, False], [False, True]])
