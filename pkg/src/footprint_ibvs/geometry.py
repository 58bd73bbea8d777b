"""Camera model, rays, the ground plane and 2D polygon primitives.

Conventions used throughout the package:

* World frame is right-handed with z up; the ground is the plane z = 0.
* A pose maps world to camera coordinates, ``x_cam = R @ x_world + t``.
  The camera looks along its +z axis, image u grows right and v grows down,
  and the image origin is the top-left corner of the top-left pixel.
* Points are plain ``numpy`` arrays of shape (3,) (world) or (2,) (planar).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateError, FrameMismatchError

ORTHONORMAL_TOL = 1e-9
BEHIND_EPS = 1e-9
PARALLEL_EPS = 1e-12
HIT_EPS = 1e-9

# camera optical axes (x right, y down, z forward) expressed in a body frame
# with x forward, y left, z up
_OPTICAL_TO_BODY = np.array([[0.0, 0.0, 1.0],
                             [-1.0, 0.0, 0.0],
                             [0.0, -1.0, 0.0]])


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Same field of view rendered at a different resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx,
                                self.cy * sy, int(width), int(height))


@dataclass(frozen=True, eq=False)
class Pose3:
    """Rigid world-to-camera transform."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = _frozen(self.R, (3, 3))
        t = _frozen(self.t, (3,))
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("pose must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("R must have determinant +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose3":
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def __eq__(self, other):
        if not isinstance(other, Pose3):
            return NotImplemented
        return bool(np.array_equal(self.R, other.R) and np.array_equal(self.t, other.t))

    __hash__ = None


@dataclass(frozen=True)
class Camera:
    intrinsics: CameraIntrinsics
    pose: Pose3

    def with_pose(self, pose: Pose3) -> "Camera":
        return Camera(self.intrinsics, pose)

    def with_intrinsics(self, intrinsics: CameraIntrinsics) -> "Camera":
        return Camera(intrinsics, self.pose)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _frozen(self.origin, (3,))
        d = _frozen(self.direction, (3,))
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, s: float) -> np.ndarray:
        return self.origin + s * self.direction


@dataclass(frozen=True)
class GroundPlane:
    height: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.height):
            raise ValueError("plane height must be finite")


class Frame(str, enum.Enum):
    WORLD_METERS = "WORLD_METERS"
    IMAGE_PIXELS = "IMAGE_PIXELS"


def _next(v: np.ndarray, k: int = 1) -> np.ndarray:
    """Cyclic shift ``v[i] -> v[i + k]`` along the first axis (a cheap ``np.roll``)."""
    return np.concatenate((v[k:], v[:k]))


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, _next(y)) - np.dot(_next(x), y))


@dataclass(frozen=True, eq=False)
class Polygon2D:
    """Ordered polygon, stored with positive shoelace sum.

    Vertices given in clockwise order are reversed on construction, so every
    instance is counter-clockwise in its stored coordinates.
    """

    vertices: np.ndarray
    frame: Frame = Frame.WORLD_METERS

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) < 3:
            raise DegenerateError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        area = _signed_area(v)
        if area == 0.0:
            raise DegenerateError("polygon has zero area")
        if area < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "frame", Frame(self.frame))

    def __len__(self):
        return len(self.vertices)

    def edges(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices, self._edge_ends

    @cached_property
    def _edge_ends(self) -> np.ndarray:
        return _next(self.vertices)

    @cached_property
    def convex(self) -> bool:
        """True when no interior angle exceeds 180 degrees."""
        a, b, c = self.vertices, self._edge_ends, _next(self.vertices, 2)
        cr = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - b[:, 0])
        return bool(np.all(cr >= 0))

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges touch."""
        a, b = self.edges()
        n = len(a)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_touch(a[i], b[i], a[j], b[j]):
                    return False
        return True


@dataclass(frozen=True)
class AABB2D:
    min_u: float
    min_v: float
    max_u: float
    max_v: float

    def __post_init__(self):
        if self.min_u > self.max_u or self.min_v > self.max_v:
            raise ValueError("AABB min must not exceed max")

    def to_polygon(self) -> Polygon2D:
        """Rectangle covering the full extent of the bounded pixels.

        Bounds are pixel indices, so the right and bottom edges sit one unit
        past ``max_u`` and ``max_v``.
        """
        u0, v0, u1, v1 = self.min_u, self.min_v, self.max_u + 1, self.max_v + 1
        return Polygon2D([(u0, v0), (u1, v0), (u1, v1), (u0, v1)], Frame.IMAGE_PIXELS)

    def expanded(self, margin: float) -> "AABB2D":
        return AABB2D(self.min_u - margin, self.min_v - margin,
                      self.max_u + margin, self.max_v + margin)


# --------------------------------------------------------------------------
# camera construction

def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def pose_from_ypr(center, yaw: float, pitch: float, roll: float) -> Pose3:
    """World-to-camera pose for a camera at ``center``.

    ``yaw`` turns the viewing direction about world z (0 looks along +x),
    positive ``pitch`` tilts it downward and ``roll`` spins it about the
    optical axis. Rotations compose in Z-Y-X order.
    """
    R_cw = rot_z(yaw) @ rot_y(pitch) @ rot_x(roll) @ _OPTICAL_TO_BODY
    R = R_cw.T
    c = np.asarray(center, dtype=np.float64)
    return Pose3(R, -R @ c)


def ypr_from_pose(pose: Pose3) -> Tuple[np.ndarray, float, float, float]:
    """Inverse of :func:`pose_from_ypr`: ``(center, yaw, pitch, roll)``."""
    M = pose.R.T @ _OPTICAL_TO_BODY.T
    pitch = math.asin(max(-1.0, min(1.0, -M[2, 0])))
    yaw = math.atan2(M[1, 0], M[0, 0])
    roll = math.atan2(M[2, 1], M[2, 2])
    return pose.center, yaw, pitch, roll


# --------------------------------------------------------------------------
# projection and rays

def project_point(p, cam: Camera) -> Optional[Tuple[float, float]]:
    """Pixel coordinates of world point ``p``, or None when it is behind."""
    x = cam.pose.R @ np.asarray(p, dtype=np.float64) + cam.pose.t
    if x[2] <= BEHIND_EPS:
        return None
    k = cam.intrinsics
    return (k.fx * x[0] / x[2] + k.cx, k.fy * x[1] / x[2] + k.cy)


def project_points(points, cam: Camera) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of (N, 3) points.

    Returns ``(uv, in_front)``; rows of ``uv`` where ``in_front`` is False
    are NaN.
    """
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    X = P @ cam.pose.R.T + cam.pose.t
    ok = X[:, 2] > BEHIND_EPS
    k = cam.intrinsics
    uv = np.full((len(P), 2), np.nan)
    z = X[ok, 2]
    uv[ok, 0] = k.fx * X[ok, 0] / z + k.cx
    uv[ok, 1] = k.fy * X[ok, 1] / z + k.cy
    return uv, ok


def unproject_pixel(u: float, v: float, cam: Camera) -> Ray:
    k = cam.intrinsics
    d = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
    d /= np.linalg.norm(d)
    return Ray(cam.pose.center, cam.pose.R.T @ d)


def unproject_pixels(uv, cam: Camera) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`unproject_pixel`: ``(origin (3,), directions (N, 3))``."""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    k = cam.intrinsics
    d = np.column_stack([(uv[:, 0] - k.cx) / k.fx, (uv[:, 1] - k.cy) / k.fy,
                         np.ones(len(uv))])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return cam.pose.center, d @ cam.pose.R


def ray_plane_intersect(r: Ray, g: GroundPlane) -> Optional[np.ndarray]:
    """Point where the ray meets the plane z = g.height, or None."""
    dz = r.direction[2]
    if abs(dz) < PARALLEL_EPS:
        return None
    s = (g.height - r.origin[2]) / dz
    if s <= HIT_EPS:
        return None
    p = r.origin + s * r.direction
    p[2] = g.height
    return p


def intersect_ground(origin, directions, g: GroundPlane) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised ray/plane intersection; returns ``(points, hit)``."""
    o = np.asarray(origin, dtype=np.float64)
    D = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    dz = D[:, 2]
    hit = np.abs(dz) >= PARALLEL_EPS
    s = np.full(len(D), np.nan)
    s[hit] = (g.height - o[2]) / dz[hit]
    hit &= s > HIT_EPS
    pts = o + s[:, None] * D
    pts[hit, 2] = g.height
    pts[~hit] = np.nan
    return pts, hit


# --------------------------------------------------------------------------
# planar polygons

def polygon_area(p: Polygon2D) -> float:
    return abs(_signed_area(p.vertices))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Sequence[float]],
                frame: Frame = Frame.WORLD_METERS) -> Polygon2D:
    """Counter-clockwise hull by Andrew's monotone chain.

    Collinear boundary points are dropped.
    """
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    if len(pts) < 3:
        raise DegenerateError("need at least 3 distinct points")

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateError("all points are collinear")
    return Polygon2D(hull, frame)


def _on_segment(q, a, b, tol=1e-12) -> bool:
    scale = max(1.0, abs(b[0] - a[0]) + abs(b[1] - a[1]))
    if abs(_cross(a, b, q)) > tol * scale * scale:
        return False
    return (min(a[0], b[0]) - tol <= q[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= q[1] <= max(a[1], b[1]) + tol)


def point_in_polygon(q, p: Polygon2D) -> bool:
    """Even-odd containment; points on the boundary count as inside."""
    x, y = float(q[0]), float(q[1])
    v = p.vertices
    n = len(v)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = v[i]
        xj, yj = v[j]
        if _on_segment((x, y), (xj, yj), (xi, yi)):
            return True
        if (yi > y) != (yj > y):
            xc = xj + (y - yj) * (xi - xj) / (yi - yj)
            if x < xc:
                inside = not inside
        j = i
    return inside


def _orient(a, b, c) -> int:
    v = float(_cross(a, b, c))
    return (v > 0) - (v < 0)


def _segments_properly_cross(a, b, c, d) -> bool:
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def _segments_touch(a, b, c, d) -> bool:
    if _segments_properly_cross(a, b, c, d):
        return True
    return (_on_segment(c, a, b) or _on_segment(d, a, b)
            or _on_segment(a, c, d) or _on_segment(b, c, d))


def polygon_contains_polygon(inner: Polygon2D, container: Polygon2D) -> bool:
    """True when ``inner`` lies inside ``container`` (boundary contact allowed).

    Works for concave containers: besides the vertex test, an inner edge may
    not cross a container edge, and edges that graze container vertices are
    split there and each piece's midpoint is tested.
    """
    if inner.frame != container.frame:
        raise FrameMismatchError(f"{inner.frame.value} vs {container.frame.value}")
    if is_convex(container):
        # a convex container holds a polygon iff it holds all of its vertices
        return bool(np.all(_halfplane_margin(inner.vertices, container) >= -_contain_tol(container)))
    for q in inner.vertices:
        if not point_in_polygon(q, container):
            return False
    ca, cb = container.edges()
    ia, ib = inner.edges()
    for a, b in zip(ia, ib):
        ts = []
        for c, d in zip(ca, cb):
            if _segments_properly_cross(a, b, c, d):
                return False
            if _on_segment(c, a, b):
                ts.append(_param(a, b, c))
        if ts:
            ts = sorted(set([0.0, 1.0] + ts))
            for t0, t1 in zip(ts[:-1], ts[1:]):
                m = a + 0.5 * (t0 + t1) * (b - a)
                if not point_in_polygon(m, container):
                    return False
    return True


def is_convex(p: Polygon2D) -> bool:
    """True when no interior angle exceeds 180 degrees."""
    return p.convex


def _halfplane_margin(points: np.ndarray, convex: Polygon2D) -> np.ndarray:
    """Smallest edge cross product per point; >= 0 means inside."""
    a, b = convex.edges()
    e = b - a
    P = np.asarray(points, dtype=np.float64)
    cr = e[None, :, 0] * (P[:, None, 1] - a[None, :, 1]) - e[None, :, 1] * (P[:, None, 0] - a[None, :, 0])
    return cr.min(axis=1)


def _contain_tol(p: Polygon2D) -> float:
    span = float(np.ptp(p.vertices, axis=0).max())
    return 1e-12 * max(1.0, span) ** 2


def _param(a, b, q) -> float:
    d = b - a
    return float(np.dot(q - a, d) / np.dot(d, d))


def clip_polygon(subject: np.ndarray, clipper: Polygon2D) -> np.ndarray:
    """Sutherland-Hodgman clip of a vertex ring against a convex polygon.

    Returns the clipped ring (possibly with fewer than 3 vertices).
    """
    out = [tuple(p) for p in np.asarray(subject, dtype=np.float64)]
    ca, cb = clipper.edges()
    for a, b in zip(ca, cb):
        if not out:
            break
        src, out = out, []
        for i in range(len(src)):
            p, q = src[i], src[(i + 1) % len(src)]
            pin, qin = _cross(a, b, p) >= 0, _cross(a, b, q) >= 0
            if pin:
                out.append(p)
            if pin != qin:
                dp, dq = _cross(a, b, p), _cross(a, b, q)
                s = dp / (dp - dq)
                out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    return np.array(out, dtype=np.float64).reshape(-1, 2)
