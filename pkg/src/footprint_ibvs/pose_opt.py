"""Silhouette-alignment refinement of noisy camera poses.

Two parameterisations are supported. ``DEFAULT`` optimises all six degrees
of freedom. ``PLANE`` keeps the camera at its known mounting height with zero
roll and optimises only (x, y, yaw, pitch), so the camera center can move
only within the horizontal plane it is known to lie in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import BadConfigError
from .geometry import Camera, CameraIntrinsics, Pose3, pose_from_ypr, ypr_from_pose
from .mesh import RobotPose, TriMesh
from .render import silhouette
from .rng import Xoshiro256


class Mode(str, enum.Enum):
    DEFAULT = "DEFAULT"
    PLANE = "PLANE"


@dataclass(frozen=True)
class PoseParams:
    mode: Mode
    values: Tuple[float, ...]
    height: Optional[float] = None

    @classmethod
    def from_pose(cls, pose: Pose3, mode: Mode, height: Optional[float] = None) -> "PoseParams":
        c, yaw, pitch, roll = ypr_from_pose(pose)
        if mode is Mode.PLANE:
            if height is None:
                raise BadConfigError("PLANE mode needs the camera height")
            return cls(mode, (float(c[0]), float(c[1]), yaw, pitch), float(height))
        return cls(mode, (float(c[0]), float(c[1]), float(c[2]), yaw, pitch, roll))

    def to_pose(self) -> Pose3:
        return params_to_pose(np.asarray(self.values), self.mode, self.height)


def params_to_pose(x: np.ndarray, mode: Mode, height: Optional[float] = None) -> Pose3:
    """Z-Y-X (yaw, pitch, roll) camera pose from a parameter vector."""
    if mode is Mode.PLANE:
        return pose_from_ypr((x[0], x[1], height), x[2], x[3], 0.0)
    return pose_from_ypr((x[0], x[1], x[2]), x[3], x[4], x[5])


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 300
    simplex_tol: float = 1e-4
    step_translation: float = 0.02
    step_rotation: float = 0.02
    frames_used: Optional[int] = None

    def validate(self) -> None:
        if self.max_iters <= 0 or self.simplex_tol <= 0:
            raise BadConfigError("max_iters and simplex_tol must be positive")
        if self.step_translation <= 0 or self.step_rotation <= 0:
            raise BadConfigError("initial steps must be positive")
        if self.frames_used is not None and self.frames_used <= 0:
            raise BadConfigError("frames_used must be positive")


@dataclass
class RefineResult:
    refined: Pose3
    initial_loss: float
    final_loss: float
    iterations: int
    loss_trace: List[float] = field(default_factory=list)
    position_error_before: Optional[float] = None
    position_error_after: Optional[float] = None


def _iou_loss(rendered: np.ndarray, observed: np.ndarray) -> float:
    union = np.count_nonzero(rendered | observed)
    if union == 0:
        return 0.0
    return 1.0 - np.count_nonzero(rendered & observed) / union


class SilhouetteLoss:
    """Mean (1 - IoU) of re-rendered silhouettes against observed masks.

    Robot placement is done once up front; each call only re-projects.
    """

    def __init__(self, intrinsics: CameraIntrinsics,
                 frames: Sequence[Tuple[np.ndarray, RobotPose]], mesh: TriMesh):
        if not frames:
            raise BadConfigError("at least one frame is required")
        self.intrinsics = intrinsics
        self.triangles = mesh.triangles
        self.placed = [pose.body_to_world(mesh.vertices) for _, pose in frames]
        self.observed = [np.asarray(m, dtype=bool) for m, _ in frames]
        self.evaluations = 0

    def __call__(self, pose: Pose3) -> float:
        self.evaluations += 1
        cam = Camera(self.intrinsics, pose)
        total = 0.0
        for verts, obs in zip(self.placed, self.observed):
            total += _iou_loss(silhouette(verts, self.triangles, cam), obs)
        return total / len(self.placed)


def silhouette_loss(candidate: Pose3, intrinsics: CameraIntrinsics,
                    frames: Sequence[Tuple[np.ndarray, RobotPose]], mesh: TriMesh) -> float:
    return SilhouetteLoss(intrinsics, frames, mesh)(candidate)


def _rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    k = axis / np.linalg.norm(axis)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def perturb_pose(p: Pose3, trans_mag: float, rot_mag: float, rng: Xoshiro256) -> Pose3:
    """Offset ``t`` by exactly ``trans_mag`` and rotate by exactly ``rot_mag``.

    The translation direction and rotation axis are uniform on the sphere;
    the rotation is applied on the left, ``R' = dR @ R``.
    """
    if trans_mag < 0 or rot_mag < 0:
        raise ValueError("perturbation magnitudes must be non-negative")
    u = rng.unit_vector()
    axis = rng.unit_vector()
    if trans_mag == 0 and rot_mag == 0:
        return p
    t = p.t + trans_mag * (u / np.linalg.norm(u))
    R = p.R
    if rot_mag > 0:
        # re-orthonormalise to stay inside the Pose3 tolerance
        U, _, Vt = np.linalg.svd(_rotation_about(axis, rot_mag) @ p.R)
        R = U @ Vt
    return Pose3(R, t)


def _subsample(frames: Sequence, n: Optional[int]) -> list:
    frames = list(frames)
    if n is None or n >= len(frames):
        return frames
    idx = np.linspace(0, len(frames) - 1, n).round().astype(int)
    return [frames[i] for i in idx]


def refine(initial: Pose3, mode: Mode, cfg: RefineConfig,
           frames: Sequence[Tuple[np.ndarray, RobotPose]], mesh: TriMesh,
           intrinsics: CameraIntrinsics, known_height: Optional[float] = None,
           true_pose: Optional[Pose3] = None) -> RefineResult:
    """Nelder-Mead search for the pose whose silhouettes match ``frames``.

    Stops after ``cfg.max_iters`` iterations or once the loss values at the
    simplex vertices differ by less than ``cfg.simplex_tol``. The starting
    pose wins ties, so the result never scores worse than it.
    """
    cfg.validate()
    mode = Mode(mode)
    if mode is Mode.PLANE and known_height is None:
        raise BadConfigError("PLANE mode needs known_height")
    loss = SilhouetteLoss(intrinsics, _subsample(frames, cfg.frames_used), mesh)

    x0 = np.asarray(PoseParams.from_pose(initial, mode, known_height).values)
    start_pose = initial if mode is Mode.DEFAULT else params_to_pose(x0, mode, known_height)
    n_trans = 2 if mode is Mode.PLANE else 3
    steps = np.array([cfg.step_translation] * n_trans
                     + [cfg.step_rotation] * (len(x0) - n_trans))
    simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * steps[i] for i in range(len(x0))])

    best = [math.inf]
    trace: List[float] = []

    def objective(x):
        val = loss(params_to_pose(x, mode, known_height))
        if val < best[0]:
            best[0] = val
        return val

    initial_loss = loss(start_pose)
    res = minimize(objective, x0, method="Nelder-Mead",
                   callback=lambda xk: trace.append(best[0]),
                   options=dict(initial_simplex=simplex, maxiter=cfg.max_iters,
                                maxfev=cfg.max_iters * (len(x0) + 3),
                                xatol=np.inf, fatol=cfg.simplex_tol))
    refined = params_to_pose(res.x, mode, known_height)
    final_loss = float(res.fun)
    if not final_loss < initial_loss:
        refined, final_loss = start_pose, initial_loss
    result = RefineResult(refined, initial_loss, final_loss, int(res.nit),
                          [initial_loss] + [min(v, initial_loss) for v in trace])
    if true_pose is not None:
        result.position_error_before = float(np.linalg.norm(initial.center - true_pose.center))
        result.position_error_after = float(np.linalg.norm(refined.center - true_pose.center))
    return result
