"""Footprint- versus bounding-box-based safety checks in the image plane.

A pose is safe under ``BBOX`` when the axis-aligned box around the robot's
full silhouette stays inside the camera's drivable region, and safe under
``FOOTPRINT`` when the projected ground footprint does. Poses where the
robot is not visible at all are unsafe under both and reported separately.
A silhouette cut off by the image border is never bbox-safe, because the
full box would reach past the frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadParamsError, BehindCameraError, EmptyMaskError
from .footprint import Footprint, project_footprint
from .geometry import Camera, Frame, Polygon2D, polygon_contains_polygon
from .mesh import RobotPose, TriMesh
from .render import mask_bbox, robot_silhouette


class CheckMode(str, enum.Enum):
    BBOX = "BBOX"
    FOOTPRINT = "FOOTPRINT"


@dataclass(frozen=True)
class DrivableRegion:
    camera_id: str
    polygon: Polygon2D

    def __post_init__(self):
        if self.polygon.frame is not Frame.IMAGE_PIXELS:
            raise ValueError("drivable regions live in image pixels")


@dataclass(frozen=True)
class Trajectory:
    poses: Tuple[RobotPose, ...]

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if not self.poses:
            raise ValueError("trajectory needs at least one pose")


@dataclass(frozen=True)
class PoseVerdict:
    safe_bbox: bool
    safe_footprint: bool
    out_of_view: bool
    # projected footprint lies inside the silhouette bbox grown by PREMISE_MARGIN_PX
    footprint_in_bbox: bool
    truncated: bool = False


# slack for the footprint-in-bbox premise: pixel-center sampling can miss a
# silhouette corner tip by about a pixel, and the overhead footprint is a
# couple of millimetres wider than the base
PREMISE_MARGIN_PX = 2.0


def _touches_border(mask: np.ndarray) -> bool:
    return bool(mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any())


def evaluate_pose(pose: RobotPose, fp: Footprint, mesh: TriMesh, cam: Camera,
                  region: DrivableRegion) -> PoseVerdict:
    mask = robot_silhouette(mesh, pose, cam)
    try:
        aabb = mask_bbox(mask)
    except EmptyMaskError:
        return PoseVerdict(False, False, True, False)
    truncated = _touches_border(mask)
    safe_bbox = not truncated and polygon_contains_polygon(aabb.to_polygon(), region.polygon)
    try:
        poly = project_footprint(fp, pose, cam)
    except BehindCameraError:
        return PoseVerdict(safe_bbox, False, False, False, truncated)
    safe_fp = polygon_contains_polygon(poly, region.polygon)
    premise = not truncated and polygon_contains_polygon(
        poly, aabb.expanded(PREMISE_MARGIN_PX).to_polygon())
    return PoseVerdict(safe_bbox, safe_fp, False, premise, truncated)


def check_pose(pose: RobotPose, fp: Footprint, mesh: TriMesh, cam: Camera,
               region: DrivableRegion, mode: CheckMode) -> bool:
    v = evaluate_pose(pose, fp, mesh, cam, region)
    return v.safe_bbox if CheckMode(mode) is CheckMode.BBOX else v.safe_footprint


@dataclass
class SafetyReport:
    safe_bbox: List[bool]
    safe_footprint: List[bool]
    out_of_view: List[bool]

    @property
    def n_safe_bbox(self) -> int:
        return sum(self.safe_bbox)

    @property
    def n_safe_footprint(self) -> int:
        return sum(self.safe_footprint)

    @property
    def n_out_of_view(self) -> int:
        return sum(self.out_of_view)

    @property
    def trajectory_safe_bbox(self) -> bool:
        return all(self.safe_bbox)

    @property
    def trajectory_safe_footprint(self) -> bool:
        return all(self.safe_footprint)


def check_trajectory(traj: Trajectory, fp: Footprint, mesh: TriMesh, cam: Camera,
                     region: DrivableRegion) -> SafetyReport:
    verdicts = [evaluate_pose(p, fp, mesh, cam, region) for p in traj.poses]
    return SafetyReport([v.safe_bbox for v in verdicts],
                        [v.safe_footprint for v in verdicts],
                        [v.out_of_view for v in verdicts])


@dataclass
class AreaGainResult:
    gain: float
    footprint_count: int
    bbox_count: int
    in_view_count: int
    total_poses: int
    bbox_count_zero: bool
    # grid poses where the projected footprint escapes the silhouette bbox
    premise_violations: List[RobotPose] = field(default_factory=list)
    # poses with safe_bbox and not safe_footprint although the premise holds
    dominance_violations: List[RobotPose] = field(default_factory=list)
    footprint_only: List[RobotPose] = field(default_factory=list)


def grid_poses(bounds: Sequence[float], spacing: float, yaw_samples: int) -> List[RobotPose]:
    if spacing <= 0 or yaw_samples <= 0:
        raise BadParamsError("spacing and yaw_samples must be positive")
    xmin, ymin, xmax, ymax = bounds
    nx = int(math.floor((xmax - xmin) / spacing + 1e-9)) + 1
    ny = int(math.floor((ymax - ymin) / spacing + 1e-9)) + 1
    poses = []
    for j in range(ny):
        for i in range(nx):
            for k in range(yaw_samples):
                poses.append(RobotPose(xmin + i * spacing, ymin + j * spacing,
                                       2.0 * math.pi * k / yaw_samples))
    return poses


def area_gain(fp: Footprint, mesh: TriMesh, cam: Camera, region: DrivableRegion,
              bounds: Sequence[float], spacing: float = 0.05,
              yaw_samples: int = 8) -> AreaGainResult:
    """Ratio of footprint-safe to bbox-safe poses over a floor grid.

    Out-of-view poses are excluded from both counts. When no pose is
    bbox-safe the gain is ``inf`` and ``bbox_count_zero`` is set.
    """
    poses = grid_poses(bounds, spacing, yaw_samples)
    n_fp = n_bb = n_view = 0
    premise_bad, dom_bad, fp_only = [], [], []
    for pose in poses:
        v = evaluate_pose(pose, fp, mesh, cam, region)
        if v.out_of_view:
            continue
        n_view += 1
        n_fp += v.safe_footprint
        n_bb += v.safe_bbox
        if not v.footprint_in_bbox:
            premise_bad.append(pose)
        elif v.safe_bbox and not v.safe_footprint:
            dom_bad.append(pose)
        if v.safe_footprint and not v.safe_bbox:
            fp_only.append(pose)
    gain = n_fp / n_bb if n_bb else math.inf
    return AreaGainResult(gain, n_fp, n_bb, n_view, len(poses), n_bb == 0,
                          premise_bad, dom_bad, fp_only)
