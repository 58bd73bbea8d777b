from __future__ import annotations

import math

import numpy as np
import pytest

from footprint_ibvs.geometry import Camera, CameraIntrinsics, Pose3, pose_from_ypr
from footprint_ibvs.mesh import jackal_like_mesh
from footprint_ibvs.scene import gen_scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def down_camera():
    """128x128 camera at (0, 0, 1) looking straight down."""
    intr = CameraIntrinsics(100.0, 100.0, 64.0, 64.0, 128, 128)
    R = np.diag([1.0, -1.0, -1.0])
    return Camera(intr, Pose3(R, -R @ np.array([0.0, 0.0, 1.0])))


@pytest.fixture
def identity_camera():
    return Camera(CameraIntrinsics(100.0, 100.0, 64.0, 64.0, 128, 128), Pose3.identity())


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    gen_scene(d)
    return d


@pytest.fixture(scope="session")
def scene(scene_dir):
    from footprint_ibvs.scene import load_scene
    return load_scene(scene_dir)


@pytest.fixture(scope="session")
def mesh():
    return jackal_like_mesh()


@pytest.fixture(scope="session")
def footprint(scene, mesh):
    from footprint_ibvs.pipeline import estimate_footprint
    return estimate_footprint(scene, mesh)[0]


def oblique_camera(size=128, center=(0.0, -3.0, 2.5), yaw=math.pi / 2, pitch=math.radians(30)):
    f = (size / 2) / math.tan(math.radians(25))
    return Camera(CameraIntrinsics(f, f, size / 2, size / 2, size, size),
                  pose_from_ypr(center, yaw, pitch, 0.0))
