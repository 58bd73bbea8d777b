"""Demo scene: a square room watched by three wall-mounted cameras.

Each camera sits on a wall at 2.5 m, looks toward the room center and is
pitched 30 degrees down. Its drivable region is the image of the room floor,
so the band of the image showing the far wall is excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (Camera, CameraIntrinsics, Frame, GroundPlane, Polygon2D, Pose3,
                       clip_polygon, pose_from_ypr)
from .io import read_json, write_json
from .mesh import TriMesh, jackal_like_mesh, load_obj
from .safety import DrivableRegion

CAMERA_HEIGHT = 2.5
CAMERA_PITCH = math.radians(30.0)
IMAGE_SIZE = 256
HFOV = math.radians(50.0)
ROOM_HALF = 3.0
NEAR_CLIP = 0.05


@dataclass(frozen=True)
class SceneCamera:
    id: str
    camera: Camera
    height: float


@dataclass
class SceneSpec:
    mesh_path: str
    cameras: List[SceneCamera]
    ground: GroundPlane
    regions: Dict[str, DrivableRegion]
    spin_center: Tuple[float, float]
    spin_half_extent: float
    floor_bounds: Tuple[float, float, float, float]
    base_dir: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.cameras:
            raise ValueError("scene needs at least one camera")
        if any(c.height <= 0 for c in self.cameras):
            raise ValueError("camera heights must be positive")

    def camera(self, cam_id: str) -> SceneCamera:
        for c in self.cameras:
            if c.id == cam_id:
                return c
        raise KeyError(cam_id)

    @property
    def camera_map(self) -> Dict[str, Camera]:
        return {c.id: c.camera for c in self.cameras}

    def load_mesh(self) -> TriMesh:
        path = Path(self.mesh_path)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return load_obj(path.read_text())

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        cams = []
        for c in self.cameras:
            k = c.camera.intrinsics
            cams.append({
                "id": c.id,
                "width": k.width, "height": k.height,
                "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                "R": c.camera.pose.R.tolist(),
                "t": c.camera.pose.t.tolist(),
                "mount_height": c.height,
            })
        return {
            "mesh": self.mesh_path,
            "ground_height": self.ground.height,
            "spin_center": list(self.spin_center),
            "spin_half_extent": self.spin_half_extent,
            "floor_bounds": list(self.floor_bounds),
            "cameras": cams,
            "regions": [{"camera_id": r.camera_id, "vertices": r.polygon.vertices.tolist()}
                        for r in self.regions.values()],
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "SceneSpec":
        cams = []
        for c in d["cameras"]:
            intr = CameraIntrinsics(float(c["fx"]), float(c["fy"]), float(c["cx"]),
                                    float(c["cy"]), int(c["width"]), int(c["height"]))
            cams.append(SceneCamera(c["id"], Camera(intr, Pose3(c["R"], c["t"])),
                                    float(c["mount_height"])))
        regions = {r["camera_id"]: DrivableRegion(r["camera_id"],
                                                  Polygon2D(r["vertices"], Frame.IMAGE_PIXELS))
                   for r in d["regions"]}
        return cls(d["mesh"], cams, GroundPlane(float(d["ground_height"])), regions,
                   tuple(float(v) for v in d["spin_center"]), float(d["spin_half_extent"]),
                   tuple(float(v) for v in d["floor_bounds"]), base_dir)

    def save(self, path: Path) -> None:
        write_json(path, self.to_dict())


def load_scene(path: Path) -> SceneSpec:
    path = Path(path)
    if path.is_dir():
        path = path / "scene.json"
    return SceneSpec.from_dict(read_json(path), path.parent)


def scenes_equal(a: SceneSpec, b: SceneSpec) -> bool:
    return a.to_dict() == b.to_dict()


def floor_region(cam: Camera, bounds: Sequence[float], cam_id: str) -> DrivableRegion:
    """Image of the floor rectangle, clipped to the image frame."""
    xmin, ymin, xmax, ymax = bounds
    floor = np.array([[xmin, ymin, 0.0], [xmax, ymin, 0.0],
                      [xmax, ymax, 0.0], [xmin, ymax, 0.0]])
    X = floor @ cam.pose.R.T + cam.pose.t
    # clip against the plane z_cam >= NEAR_CLIP before projecting
    ring = []
    for i in range(4):
        p, q = X[i], X[(i + 1) % 4]
        if p[2] >= NEAR_CLIP:
            ring.append(p)
        if (p[2] >= NEAR_CLIP) != (q[2] >= NEAR_CLIP):
            s = (NEAR_CLIP - p[2]) / (q[2] - p[2])
            ring.append(p + s * (q - p))
    ring = np.array(ring)
    k = cam.intrinsics
    uv = np.column_stack([k.fx * ring[:, 0] / ring[:, 2] + k.cx,
                          k.fy * ring[:, 1] / ring[:, 2] + k.cy])
    frame = Polygon2D([(0, 0), (k.width, 0), (k.width, k.height), (0, k.height)],
                      Frame.IMAGE_PIXELS)
    clipped = clip_polygon(Polygon2D(uv, Frame.IMAGE_PIXELS).vertices, frame)
    return DrivableRegion(cam_id, Polygon2D(clipped, Frame.IMAGE_PIXELS))


def full_image_region(cam: Camera, cam_id: str) -> DrivableRegion:
    k = cam.intrinsics
    return DrivableRegion(cam_id, Polygon2D(
        [(0, 0), (k.width, 0), (k.width, k.height), (0, k.height)], Frame.IMAGE_PIXELS))


def demo_cameras(size: int = IMAGE_SIZE) -> List[SceneCamera]:
    f = (size / 2.0) / math.tan(HFOV / 2.0)
    intr = CameraIntrinsics(f, f, size / 2.0, size / 2.0, size, size)
    mounts = [("cam0", (0.0, -ROOM_HALF), math.pi / 2),
              ("cam1", (ROOM_HALF, 0.0), math.pi),
              ("cam2", (0.0, ROOM_HALF), -math.pi / 2)]
    return [SceneCamera(cid, Camera(intr, pose_from_ypr((x, y, CAMERA_HEIGHT), yaw,
                                                         CAMERA_PITCH, 0.0)), CAMERA_HEIGHT)
            for cid, (x, y), yaw in mounts]


def demo_scene(mesh_path: str = "robot.obj") -> SceneSpec:
    bounds = (-ROOM_HALF, -ROOM_HALF, ROOM_HALF, ROOM_HALF)
    cams = demo_cameras()
    regions = {c.id: floor_region(c.camera, bounds, c.id) for c in cams}
    return SceneSpec(mesh_path, cams, GroundPlane(0.0), regions, (0.0, 0.0), 0.5, bounds)


def gen_scene(out_dir: Path) -> SceneSpec:
    """Write ``robot.obj`` and ``scene.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "robot.obj").write_text(jackal_like_mesh().to_obj())
    scene = demo_scene("robot.obj")
    scene.base_dir = out_dir
    scene.save(out_dir / "scene.json")
    return scene
