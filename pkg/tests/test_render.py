from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from footprint_ibvs.errors import EmptyMaskError
from footprint_ibvs.footprint import synth_overhead_camera
from footprint_ibvs.geometry import (AABB2D, Camera, CameraIntrinsics, Pose3, convex_hull,
                                     pose_from_ypr, project_points, Frame)
from footprint_ibvs.footprint import polygon_to_mask
from footprint_ibvs.mesh import RobotPose, TriMesh, box_mesh, jackal_like_mesh, place_robot
from footprint_ibvs.render import (RenderedFrame, face_intensities, mask_bbox, rasterize,
                                   render_robot, robot_silhouette, silhouette, silhouette_bbox)

TINY = Camera(CameraIntrinsics(4.0, 4.0, 2.0, 2.0, 4, 4), Pose3.identity())


def _tri_at_depth(uv, z, intr):
    """World triangle (identity camera) whose corners project onto ``uv``."""
    uv = np.asarray(uv, dtype=float)
    x = (uv[:, 0] - intr.cx) / intr.fx * z
    y = (uv[:, 1] - intr.cy) / intr.fy * z
    return np.column_stack([x, y, np.full(3, z)])


def _inside_triangle(p, a, b, c):
    def s(p1, p2, p3):
        return (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])
    d1, d2, d3 = s(p, a, b), s(p, b, c), s(p, c, a)
    return (d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0)


def test_offscreen_mesh_gives_empty_mask():
    m = TriMesh(_tri_at_depth([(10, 10), (12, 10), (10, 12)], 1.0, TINY.intrinsics), [[0, 1, 2]],
                check_ground=False)
    f = rasterize(m, TINY)
    assert not f.mask.any() and not f.image.any() and np.isinf(f.depth).all()


def test_large_triangle_matches_point_in_triangle():
    uv = [(-0.3, -0.7), (4.6, 1.1), (0.9, 4.35)]
    m = TriMesh(_tri_at_depth(uv, 1.0, TINY.intrinsics), [[0, 1, 2]], check_ground=False)
    f = rasterize(m, TINY)
    expect = np.array([[_inside_triangle((j + 0.5, i + 0.5), *uv) for j in range(4)]
                       for i in range(4)])
    assert expect.sum() not in (0, 16)
    np.testing.assert_array_equal(f.mask, expect)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 14), st.floats(-2, 14)), min_size=3, max_size=3),
       st.booleans())
def test_random_triangles_match_oracle(uv, flip):
    if flip:
        uv = uv[::-1]
    a, b, c = np.array(uv)
    area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(area) < 1e-3:
        return
    intr = CameraIntrinsics(12.0, 12.0, 6.0, 6.0, 12, 12)
    cam = Camera(intr, Pose3.identity())
    m = TriMesh(_tri_at_depth(uv, 2.0, intr), [[0, 1, 2]], check_ground=False)
    mask = silhouette(m.vertices, m.triangles, cam)
    for i in range(12):
        for j in range(12):
            p = (j + 0.5, i + 0.5)
            if _inside_triangle(p, *uv):
                assert mask[i, j]
            else:
                # pixel centers exactly on an edge are resolved by the fill rule
                d = [abs((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
                     for q, r in ((a, b), (b, c), (c, a))]
                if min(d) > 1e-9:
                    assert not mask[i, j]


def test_shared_edge_covered_exactly_once():
    # square [0.5, 3.5]^2 split along the diagonal through pixel centers
    intr = TINY.intrinsics
    quad = [(0.5, 0.5), (3.5, 0.5), (3.5, 3.5), (0.5, 3.5)]
    t1 = _tri_at_depth([quad[0], quad[1], quad[2]], 1.0, intr)
    t2 = _tri_at_depth([quad[0], quad[2], quad[3]], 1.0, intr)
    m1 = rasterize(TriMesh(t1, [[0, 1, 2]], check_ground=False), TINY).mask
    m2 = rasterize(TriMesh(t2, [[0, 1, 2]], check_ground=False), TINY).mask
    assert not (m1 & m2).any()
    both = rasterize(TriMesh(np.vstack([t1, t2]), [[0, 1, 2], [3, 4, 5]], check_ground=False),
                     TINY).mask
    np.testing.assert_array_equal(both, m1 | m2)


def test_overhead_box_pixel_count():
    m = box_mesh((0.5, 0.4, 0.25))
    cam = synth_overhead_camera((0.0, 0.0))
    f = render_robot(m, RobotPose(0, 0, 0), cam)
    gsd = 0.002
    # the silhouette is the top face, magnified by H / (H - h)
    expected = 0.5 * 0.4 / gsd ** 2 * (20.0 / 19.75) ** 2
    assert f.mask.sum() == pytest.approx(expected, rel=0.01)


def test_mask_depth_consistency_and_determinism():
    cam = Camera(CameraIntrinsics(274.0, 274.0, 128, 128, 256, 256),
                 pose_from_ypr((0, -3, 2.5), math.pi / 2, math.radians(30), 0))
    mesh = jackal_like_mesh()
    a = render_robot(mesh, RobotPose(0.1, 0.2, 0.7), cam, "c")
    b = render_robot(mesh, RobotPose(0.1, 0.2, 0.7), cam, "c")
    np.testing.assert_array_equal(a.mask, np.isfinite(a.depth))
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(a.depth, b.depth)
    assert a.image[~a.mask].max() == 0
    assert a.image[a.mask].min() >= 40
    np.testing.assert_array_equal(robot_silhouette(mesh, RobotPose(0.1, 0.2, 0.7), cam), a.mask)


def test_zbuffer_keeps_nearest():
    intr = TINY.intrinsics
    uv = [(-1, -1), (6, -1), (-1, 6)]
    near = _tri_at_depth(uv, 1.0, intr)
    far = _tri_at_depth(uv, 2.0, intr)
    # far triangle faces the light (bright), near one faces away (dark)
    mesh = TriMesh(np.vstack([far, near]), [[0, 1, 2], [3, 5, 4]], check_ground=False)
    f = rasterize(mesh, TINY)
    vals = face_intensities(mesh.vertices, mesh.triangles)
    assert vals[0] != vals[1]
    assert (f.image[f.mask] == vals[1]).all()
    np.testing.assert_allclose(f.depth[f.mask], 1.0)


def test_face_intensities_analytic():
    # normal +z: n.l = 2/sqrt(6)
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    expect = math.floor(40 + 215 * 2 / math.sqrt(6) + 0.5)
    assert face_intensities(v, np.array([[0, 1, 2]]))[0] == expect
    assert face_intensities(v, np.array([[0, 2, 1]]))[0] == 40


def test_near_plane_clipping():
    # ground plane seen from a low camera: triangle extends behind the camera
    cam = Camera(CameraIntrinsics(50, 50, 32, 32, 64, 64),
                 pose_from_ypr((0, 0, 0.5), 0.0, 0.3, 0.0))
    tri = TriMesh([[-5, -20, 0], [20, 0, 0], [-5, 20, 0]], [[0, 1, 2]])
    f = rasterize(tri, cam)
    # every visible ground pixel is below the horizon row and covered
    horizon = 32 - 50 * math.tan(0.3)
    rows = np.where(f.mask.any(axis=1))[0]
    assert rows.min() >= math.floor(horizon)
    assert f.mask[-1].all()


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_overhead_translation_shifts_mask(dx, dy):
    m = box_mesh((0.2, 0.1, 0.1))
    cam = synth_overhead_camera((0.0, 0.0), resolution=256)
    a = robot_silhouette(m, RobotPose(0, 0, 0), cam)
    b = robot_silhouette(m, RobotPose(dx, dy, 0), cam)
    f = cam.intrinsics.fx / (20.0 - 0.1)
    ca = np.argwhere(a).mean(axis=0)
    cb = np.argwhere(b).mean(axis=0)
    # image u follows world x, image v follows -y
    assert abs((cb[1] - ca[1]) - f * dx) < 1.0
    assert abs((cb[0] - ca[0]) + f * dy) < 1.0


def test_convex_mesh_silhouette_equals_hull_raster():
    cam = Camera(CameraIntrinsics(300, 300, 128, 128, 256, 256),
                 pose_from_ypr((0, -2.0, 1.5), math.pi / 2, 0.6, 0.1))
    m = place_robot(box_mesh((0.5, 0.4, 0.25)), RobotPose(0.1, 0.2, 0.4))
    mask = rasterize(m, cam).mask
    uv, ok = project_points(m.vertices, cam)
    assert ok.all()
    hull = polygon_to_mask(convex_hull(uv, Frame.IMAGE_PIXELS), 256, 256)
    assert mask.sum() == pytest.approx(hull.sum(), rel=0.01)


def test_bbox_examples():
    m = np.zeros((10, 10), bool)
    m[3, 2] = m[7, 5] = True
    assert mask_bbox(m) == AABB2D(2, 3, 5, 7)
    assert mask_bbox(np.ones((4, 6), bool)) == AABB2D(0, 0, 5, 3)
    f = RenderedFrame(np.zeros((4, 4), np.uint8), np.zeros((4, 4), bool), np.full((4, 4), np.inf))
    with pytest.raises(EmptyMaskError):
        silhouette_bbox(f)
