import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from sculptor.errors import InputError
from sculptor.geometry import (
    Aabb3,
    BBox2,
    CompositionParams,
    DepthMap,
    PointCloud,
    ViewPose,
    angle_difference,
    check_gray,
    cloud_aabb,
    diagonal_length,
    rotate_cloud,
    rotation_matrix,
)

angles = st.floats(-180, 180, allow_nan=False)


def test_zero_rotation_is_identity(rng):
    c = PointCloud(rng.normal(size=(50, 3)))
    assert np.array_equal(rotate_cloud(c, 0, 0).points, c.points)


def test_quarter_turn_sends_x_to_plus_z():
    # Two points so the centroid is the origin.
    c = PointCloud([[1.0, 0, 0], [-1.0, 0, 0]])
    r = rotate_cloud(c, 0.0, 90.0)
    np.testing.assert_allclose(r.points[0], [0, 0, 1], atol=1e-15)


def test_elevation_turns_top_toward_viewer():
    # Same as raising the camera by the elevation: the front dips, the top faces +z.
    c = PointCloud([[0, 0, 1.0], [0, 0, -1.0], [0, 1.0, 0], [0, -1.0, 0]])
    r = rotate_cloud(c, 30.0, 0.0)
    assert math.isclose(r.points[0, 1], -math.sin(math.radians(30)))
    assert r.points[2, 2] > 0


def test_rotation_order_azimuth_then_elevation():
    np.testing.assert_allclose(
        rotation_matrix(20, 50), rotation_matrix(20, 0) @ rotation_matrix(0, 50), atol=1e-15
    )


def test_pairwise_distances_preserved_fixed_case(rng):
    c = PointCloud(rng.uniform(-1, 1, size=(100, 3)))
    d0 = pdist(c.points)
    d1 = pdist(rotate_cloud(c, 33, 121).points)
    np.testing.assert_allclose(d1, d0, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(e=angles, a=angles, seed=st.integers(0, 10_000))
def test_rotation_is_isometry_about_centroid(e, a, seed):
    c = PointCloud(np.random.default_rng(seed).normal(size=(30, 3)) * 3 + 5)
    r = rotate_cloud(c, e, a)
    np.testing.assert_allclose(pdist(r.points), pdist(c.points), rtol=1e-9)
    np.testing.assert_allclose(r.centroid, c.centroid, atol=1e-9)
    assert len(r) == len(c)


@settings(max_examples=30, deadline=None)
@given(e=angles, a=angles)
def test_inverse_rotation_composition(e, a):
    # rotation_matrix(e, a) = Rx(e) Ry(-a): the inverse undoes elevation first.
    r = rotation_matrix(e, a)
    inv = rotation_matrix(0, -a) @ rotation_matrix(-e, 0)
    np.testing.assert_allclose(inv @ r, np.eye(3), atol=1e-12)


def test_empty_cloud_rejected():
    with pytest.raises(InputError, match="empty point cloud"):
        rotate_cloud(PointCloud(np.zeros((0, 3))), 1, 2)
    with pytest.raises(InputError):
        cloud_aabb(PointCloud(np.zeros((0, 3))))


def test_cloud_validation():
    with pytest.raises(InputError):
        PointCloud([[0, 0, np.nan]])
    with pytest.raises(InputError):
        PointCloud([[0, 0, 0]], intensity=[1.5])
    with pytest.raises(InputError):
        PointCloud([[0, 0, 0], [1, 1, 1]], intensity=[0.5])


def test_aabb_examples(rng):
    cube = PointCloud([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)])
    box = cloud_aabb(cube)
    assert box.min.tolist() == [0, 0, 0] and box.max.tolist() == [1, 1, 1]
    single = cloud_aabb(PointCloud([[2, 3, 4]]))
    assert single.min.tolist() == single.max.tolist() == [2, 3, 4]
    assert single.extents.tolist() == [0, 0, 0]
    pts = rng.uniform(-1, 1, size=(1000, 3))
    box = cloud_aabb(PointCloud(pts))
    lo, hi = [min(p[k] for p in pts) for k in range(3)], [max(p[k] for p in pts) for k in range(3)]
    assert box.min.tolist() == lo and box.max.tolist() == hi


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60))
def test_aabb_contains_and_touches(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    box = cloud_aabb(PointCloud(pts))
    assert np.all(pts >= box.min) and np.all(pts <= box.max)
    for k in range(3):
        assert np.any(pts[:, k] == box.min[k]) and np.any(pts[:, k] == box.max[k])


def test_diagonal_length_examples():
    assert diagonal_length(Aabb3([0, 0, 0], [3, 4, 0])) == 5.0
    assert diagonal_length(Aabb3([0, 0, 0], [0, 0, 0])) == 0.0
    assert diagonal_length(Aabb3([0, 0, 0], [1, 1, 100])) == math.sqrt(2)


@given(z=st.floats(0, 1e6, allow_nan=False))
def test_diagonal_ignores_depth(z):
    assert diagonal_length(Aabb3([0, 0, 0], [2, 5, z])) == diagonal_length(Aabb3([0, 0, 0], [2, 5, 0]))


def test_bbox_invariants():
    b = BBox2(2, 3, 10, 7)
    assert (b.width, b.height, b.max_dim, b.center) == (8, 4, 8, (6.0, 5.0))
    with pytest.raises(InputError):
        BBox2(5, 0, 5, 3)
    with pytest.raises(InputError):
        BBox2(0, 0, 1.5, 3)
    assert b.intersects(BBox2(9, 6, 12, 12))
    assert not b.intersects(BBox2(10, 0, 12, 12))  # exclusive edges
    assert b.union(BBox2(0, 0, 1, 1)).as_tuple() == (0, 0, 10, 7)


def test_bbox_from_mask():
    m = np.zeros((10, 12), bool)
    m[2:5, 3:9] = True
    assert BBox2.from_mask(m).as_tuple() == (3, 2, 9, 5)
    with pytest.raises(InputError):
        BBox2.from_mask(np.zeros((3, 3), bool))


def test_depth_map_validation():
    DepthMap(np.where(np.eye(3, dtype=bool), 2.0, 0.0), np.eye(3, dtype=bool))
    with pytest.raises(InputError):
        DepthMap(np.zeros((3, 3)), np.eye(3, dtype=bool))
    with pytest.raises(InputError):
        DepthMap(np.ones((3, 3)), np.ones((2, 3), bool))


def test_gray_image_range():
    with pytest.raises(InputError):
        check_gray(np.full((2, 2), 1.01))


def test_view_pose_invariants():
    p = ViewPose(10, 370, 2.0, 40, 64)
    assert p.azimuth == 10.0
    for bad in (dict(elevation=91), dict(radius=0), dict(fov_y=180), dict(projection="fisheye")):
        kw = dict(elevation=0, azimuth=0, radius=1.0, fov_y=40, image_size=64) | bad
        with pytest.raises(InputError):
            ViewPose(**kw)


def test_view_pose_position_and_axes():
    p = ViewPose(0, 0, 3.0, 40, 64)
    np.testing.assert_allclose(p.position, [0, 0, 3.0])
    np.testing.assert_allclose(p.rotation, np.eye(3))
    q = ViewPose(90, 0, 3.0, 40, 64)
    np.testing.assert_allclose(q.position, [0, 3.0, 0], atol=1e-12)


def test_composition_params():
    p = CompositionParams(1, 2, 3, (4, 5, 6))
    assert CompositionParams.from_dict(p.to_dict()) == p
    with pytest.raises(InputError):
        CompositionParams(0, 0, 0)
    with pytest.raises(InputError):
        CompositionParams(0, math.inf, 1)


@pytest.mark.parametrize("a,b,d", [(359, 1, 2), (10, 350, 20), (0, 180, 180), (725, 5, 0)])
def test_angle_difference_wraps(a, b, d):
    assert angle_difference(a, b) == pytest.approx(d)
