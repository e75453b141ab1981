import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zonedepth.errors import FootprintUndefinedError
from zonedepth.geometry import CameraIntrinsics, DepthMap, Extrinsics, Rect
from zonedepth.sensor import (
    SensorConfig, ZoneGrid, all_zone_bounds, simulate_zone_grid, zone_bounds, zone_footprint_in_rgb,
    zone_footprints,
)


def test_zone_bounds_corners(K_tof):
    assert zone_bounds((0, 0), K_tof).as_tuple() == (0, 0, 8, 8)
    assert zone_bounds((7, 7), K_tof).as_tuple() == (56, 56, 64, 64)


def test_zone_bounds_tile_the_sensor(K_tof):
    cover = np.zeros((64, 64), dtype=int)
    for r in all_zone_bounds(K_tof):
        cover[int(r.y_min):int(r.y_max), int(r.x_min):int(r.x_max)] += 1
    assert (cover == 1).all()


def test_zone_bounds_out_of_range(K_tof):
    with pytest.raises(IndexError):
        zone_bounds((8, 0), K_tof)
    with pytest.raises(IndexError):
        zone_bounds((0, -1), K_tof)


def test_zone_bounds_fov_mismatch(K_tof):
    grid = ZoneGrid.from_arrays(np.ones((8, 8)), np.zeros((8, 8)), np.ones((8, 8), bool), fov_h=math.radians(60))
    with pytest.raises(ValueError):
        zone_bounds((0, 0), K_tof, grid)


def test_simulate_flat_plane(K_tof):
    zones = simulate_zone_grid(DepthMap(np.full((64, 64), 2.0)), K_tof)
    assert zones.valid.all()
    np.testing.assert_allclose(zones.means, 2.0)
    np.testing.assert_allclose(zones.variances, 0.0)


def test_simulate_half_covered_zone(K_tof):
    depth = np.full((64, 64), 2.0)
    depth[0:8, 0:4] = 1.0
    depth[0:8, 4:8] = 3.0
    z = simulate_zone_grid(DepthMap(depth), K_tof)[0, 0]
    assert z.valid
    assert z.mean == pytest.approx(2.0)
    assert z.variance == pytest.approx(1.0)


def test_simulate_out_of_range_zone_invalid(K_tof):
    depth = np.full((64, 64), 2.0)
    depth[8:16, 8:16] = 5.0
    zones = simulate_zone_grid(DepthMap(depth), K_tof)
    assert not zones[1, 1].valid
    assert zones.valid.sum() == 63


def test_simulate_min_samples(K_tof):
    depth = np.full((64, 64), 2.0)
    depth[0:8, 0:8] = np.nan
    depth[0:2, 0:7] = 1.0  # 14 usable pixels < 16
    assert not simulate_zone_grid(DepthMap(depth), K_tof)[0, 0].valid
    depth[0:2, 0:8] = 1.0  # 16 usable
    assert simulate_zone_grid(DepthMap(depth), K_tof)[0, 0].valid


def test_simulate_resolution_mismatch(K_tof):
    with pytest.raises(ValueError):
        simulate_zone_grid(DepthMap(np.ones((32, 32))), K_tof)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_simulate_matches_pixel_statistics(seed):
    cfg = SensorConfig()
    K = cfg.tof_intrinsics()
    depth = np.random.default_rng(seed).uniform(0.01, 4.5, size=(64, 64))
    zones = simulate_zone_grid(DepthMap(depth), K, cfg)
    block = depth[24:32, 40:48]
    block = block[(block >= 0.02) & (block <= 4.0)]
    z = zones[3, 5]
    assert z.valid == (block.size >= 16)
    if z.valid:
        assert z.mean == pytest.approx(block.mean())
        assert z.variance == pytest.approx(block.var())


def test_zone_grid_json_round_trip(K_tof):
    depth = np.full((64, 64), 2.0)
    depth[:8, :8] = 9.0
    zones = simulate_zone_grid(DepthMap(depth), K_tof)
    d = zones.to_dict()
    assert d["rows"] == 8 and d["fov_h_deg"] == pytest.approx(45)
    assert d["zones"][0]["mean"] is None and d["zones"][0]["valid"] is False
    back = ZoneGrid.from_dict(d)
    np.testing.assert_array_equal(back.valid, zones.valid)
    np.testing.assert_allclose(back.means[back.valid], zones.means[zones.valid])


def test_footprint_identity_equals_zone_bounds(K_tof):
    for idx in [(0, 0), (3, 4), (7, 7)]:
        for d in (0.5, 2.0, 10.0):
            fp = zone_footprint_in_rgb(idx, K_tof, K_tof, Extrinsics.identity(), d)
            np.testing.assert_allclose(fp.as_tuple(), zone_bounds(idx, K_tof).as_tuple(), atol=1e-9)


def test_footprint_parallax_shift(K_tof):
    # RGB frame -> ToF frame: p_tof = p_rgb + t, so the RGB view sees points shifted by -t
    e = Extrinsics.from_axis_angle([0, 0, 0], [0.02, 0, 0])
    base = zone_bounds((3, 3), K_tof)
    fp = zone_footprint_in_rgb((3, 3), K_tof, K_tof, e, 2.0)
    shift = K_tof.fx * 0.02 / 2.0
    assert fp.x_min == pytest.approx(base.x_min - shift)
    assert fp.y_min == pytest.approx(base.y_min)


def test_footprint_outside_rgb_image(K_tof):
    narrow = CameraIntrinsics.from_fov(64, 64, math.radians(10), math.radians(10))
    assert zone_footprint_in_rgb((3, 0), K_tof, narrow, Extrinsics.identity(), 2.0) is None


def test_footprint_behind_camera(K_tof):
    e = Extrinsics.from_axis_angle([0, 0, 0], [0, 0, 3.0])  # RGB camera 3 m in front of the sensor
    with pytest.raises(FootprintUndefinedError):
        zone_footprint_in_rgb((0, 0), K_tof, K_tof, e, 2.0)


def test_zone_footprints_mask(K_tof):
    depth = np.full((64, 64), 2.0)
    depth[:8, :8] = np.nan
    zones = simulate_zone_grid(DepthMap(depth), K_tof)
    rects, ok = zone_footprints(zones, K_tof, K_tof, Extrinsics.identity())
    assert not ok[0] and np.isnan(rects[0]).all()
    assert ok[1:].all()
    np.testing.assert_allclose(rects[9], [8, 8, 16, 16], atol=1e-9)
