from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from footprint_ibvs.errors import ObjIndexError, ObjParseError
from footprint_ibvs.mesh import (RobotPose, TriMesh, box_mesh, jackal_like_mesh, load_obj,
                                 normalize_angle, place_robot)

CUBE_OBJ = """\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def test_load_cube():
    m = load_obj(CUBE_OBJ)
    assert m.vertices.shape == (8, 3) and m.triangles.shape == (12, 3)


def test_face_suffixes_ignored():
    m = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/2/2 3/3/3\n")
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_quad_fan_triangulated():
    m = load_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_unknown_records_and_comments_ignored():
    m = load_obj("o thing\ns off\nv 0 0 0 # c\nv 1 0 0\nv 0 1 0\nusemtl x\nf 1 2 3\n")
    assert len(m.triangles) == 1


@pytest.mark.parametrize("text, lineno", [
    ("v 0 0\n", 1),
    ("v 0 0 0\nv a 0 0\n", 2),
    ("v 0 0 0\nv 1 0 0\nf 1 2\n", 3),
    ("v 0 0 0\nf 1 x 2\n", 2),
])
def test_parse_errors_report_line(text, lineno):
    with pytest.raises(ObjParseError) as exc:
        load_obj(text)
    assert exc.value.lineno == lineno


def test_index_out_of_range():
    with pytest.raises(ObjIndexError) as exc:
        load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 4\n")
    assert exc.value.lineno == 5
    with pytest.raises(ObjIndexError):
        load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")


def test_mesh_must_sit_on_ground():
    with pytest.raises(ValueError):
        load_obj("v 0 0 -0.1\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")


def test_obj_round_trip():
    m = jackal_like_mesh()
    back = load_obj(m.to_obj())
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)


def test_demo_mesh_base_on_ground():
    m = jackal_like_mesh()
    assert m.vertices[:, 2].min() == 0.0
    assert 0.3 < m.height < 0.6


def test_box_winding_outward():
    m = box_mesh((1, 2, 3))
    v, f = m.vertices, m.triangles
    center = v.mean(axis=0)
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    assert np.all(np.einsum("ij,ij->i", n, v[f].mean(axis=1) - center) > 0)


def test_place_identity():
    m = box_mesh((1, 1, 1))
    np.testing.assert_array_equal(place_robot(m, RobotPose(0, 0, 0)).vertices, m.vertices)


def test_place_translation():
    m = box_mesh((1, 1, 1))
    np.testing.assert_allclose(place_robot(m, RobotPose(1, 2, 0)).vertices,
                               m.vertices + [1, 2, 0], atol=0)


def test_place_quarter_turn():
    m = TriMesh([[1, 0, 0], [0, 0, 0], [0, 0, 1]], [[0, 1, 2]])
    out = place_robot(m, RobotPose(0, 0, math.pi / 2)).vertices
    np.testing.assert_allclose(out[0], (0, 1, 0), atol=1e-9)


def test_mesh_invariants():
    with pytest.raises(ValueError):
        TriMesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))
    with pytest.raises(IndexError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])


@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 100))
def test_yaw_normalised(a):
    y = RobotPose(0, 0, a).yaw
    assert -math.pi < y <= math.pi
    assert math.isclose(math.cos(y), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(y), math.sin(a), abs_tol=1e-9)


def test_normalize_pi_boundary():
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi
    assert RobotPose(0, 0, 2 * math.pi).yaw == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-4, 4))
def test_body_world_inverse(x, y, yaw):
    p = RobotPose(x, y, yaw)
    pts = np.array([[0.3, -0.2, 0.1], [1.0, 2.0, 0.0]])
    np.testing.assert_allclose(p.world_to_body(p.body_to_world(pts)), pts, atol=1e-9)


def test_non_finite_pose_rejected():
    with pytest.raises(ValueError):
        RobotPose(float("nan"), 0, 0)
