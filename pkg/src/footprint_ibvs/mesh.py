"""Triangle meshes, planar robot poses and a minimal Wavefront-OBJ reader."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ObjIndexError, ObjParseError


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class RobotPose:
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise ValueError("robot pose must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def body_to_world(self, pts: np.ndarray) -> np.ndarray:
        """Transform (N, 2) or (N, 3) body-frame points into the world."""
        pts = np.asarray(pts, dtype=np.float64)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        out = pts.copy()
        out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + self.x
        out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + self.y
        return out

    def world_to_body(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy = pts[:, 0] - self.x, pts[:, 1] - self.y
        out = pts.copy()
        out[:, 0] = c * dx + s * dy
        out[:, 1] = -s * dx + c * dy
        return out


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle mesh in the robot body frame, base resting on z = 0."""

    vertices: np.ndarray
    triangles: np.ndarray
    check_ground: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(f) == 0:
            raise ValueError("mesh needs at least one triangle")
        if f.min() < 0 or f.max() >= len(v):
            raise IndexError("triangle index out of range")
        if self.check_ground and v[:, 2].min() < -1e-9:
            raise ValueError("mesh must sit on the ground plane (z >= 0)")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)

    @property
    def height(self) -> float:
        return float(self.vertices[:, 2].max())

    def to_obj(self) -> str:
        lines = ["# robot mesh"]
        lines += ["v %.17g %.17g %.17g" % tuple(p) for p in self.vertices]
        lines += ["f %d %d %d" % tuple(t + 1) for t in self.triangles]
        return "\n".join(lines) + "\n"


def load_obj(text: str) -> TriMesh:
    """Parse the ``v`` and ``f`` records of a Wavefront OBJ document.

    Faces with more than three corners are fan-triangulated from their first
    corner; texture/normal suffixes (``i/t/n``) are ignored, as are all
    other record types.
    """
    verts: List[Tuple[float, float, float]] = []
    faces: List[Tuple[int, int, int]] = []
    face_lines: List[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ObjParseError(lineno, "vertex needs 3 coordinates")
            try:
                verts.append(tuple(float(x) for x in parts[1:4]))
            except ValueError:
                raise ObjParseError(lineno, f"bad vertex {raw!r}") from None
        elif tag == "f":
            if len(parts) < 4:
                raise ObjParseError(lineno, "face needs at least 3 vertices")
            try:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise ObjParseError(lineno, f"bad face {raw!r}") from None
            if any(i < 1 for i in idx):
                raise ObjIndexError(lineno, "indices are 1-based and positive")
            idx = [i - 1 for i in idx]
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
                face_lines.append(lineno)
    for (a, b, c), lineno in zip(faces, face_lines):
        if max(a, b, c) >= len(verts):
            raise ObjIndexError(lineno, f"vertex index {max(a, b, c) + 1} > {len(verts)}")
    if not faces:
        raise ObjParseError(0, "no faces")
    return TriMesh(np.array(verts), np.array(faces))


def place_robot(mesh: TriMesh, pose: RobotPose) -> TriMesh:
    """Rotate the mesh by ``pose.yaw`` about z, then shift by (x, y, 0)."""
    return TriMesh(pose.body_to_world(mesh.vertices), mesh.triangles)


def merge(meshes: Iterable[TriMesh]) -> TriMesh:
    vs, fs, off = [], [], 0
    for m in meshes:
        vs.append(m.vertices)
        fs.append(m.triangles + off)
        off += len(m.vertices)
    return TriMesh(np.vstack(vs), np.vstack(fs))


# --------------------------------------------------------------------------
# procedural meshes (outward CCW winding)

def box_mesh(size: Sequence[float], center: Sequence[float] = (0.0, 0.0, None)) -> TriMesh:
    """Axis-aligned box; by default centered in x/y with its base at z = 0."""
    sx, sy, sz = size
    cx, cy, cz = center
    if cz is None:
        cz = sz / 2.0
    x0, x1 = cx - sx / 2, cx + sx / 2
    y0, y1 = cy - sy / 2, cy + sy / 2
    z0, z1 = cz - sz / 2, cz + sz / 2
    v = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                  [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]])
    f = np.array([[0, 2, 1], [0, 3, 2],      # bottom (-z)
                  [4, 5, 6], [4, 6, 7],      # top (+z)
                  [0, 1, 5], [0, 5, 4],      # -y
                  [1, 2, 6], [1, 6, 5],      # +x
                  [2, 3, 7], [2, 7, 6],      # +y
                  [3, 0, 4], [3, 4, 7]])     # -x
    return TriMesh(v, f)


def wheel_mesh(center: Sequence[float], radius: float, width: float, sides: int = 12) -> TriMesh:
    """Prism approximating a wheel with its axle along body y."""
    cx, cy, cz = center
    ang = 2.0 * math.pi * (np.arange(sides) + 0.5) / sides
    xs = cx + radius * np.cos(ang)
    zs = cz + radius * np.sin(ang)
    y0, y1 = cy - width / 2, cy + width / 2
    v = np.vstack([np.column_stack([xs, np.full(sides, y0), zs]),
                   np.column_stack([xs, np.full(sides, y1), zs]),
                   [[cx, y0, cz], [cx, y1, cz]]])
    f = []
    c0, c1 = 2 * sides, 2 * sides + 1
    for i in range(sides):
        j = (i + 1) % sides
        f.append((c0, i, j))                       # -y cap
        f.append((c1, sides + j, sides + i))       # +y cap
        f.append((i, sides + i, sides + j))        # rim
        f.append((i, sides + j, j))
    return TriMesh(v, np.array(f))


def sphere_mesh(radius: float, center=(0.0, 0.0, None), rings: int = 8, segments: int = 16) -> TriMesh:
    cx, cy, cz = center
    if cz is None:
        cz = radius
    verts = [(cx, cy, cz - radius)]
    for i in range(1, rings):
        phi = -math.pi / 2 + math.pi * i / rings
        for j in range(segments):
            th = 2 * math.pi * j / segments
            verts.append((cx + radius * math.cos(phi) * math.cos(th),
                          cy + radius * math.cos(phi) * math.sin(th),
                          cz + radius * math.sin(phi)))
    verts.append((cx, cy, cz + radius))
    top = len(verts) - 1
    f = []
    for j in range(segments):
        f.append((0, 1 + (j + 1) % segments, 1 + j))
    for i in range(rings - 2):
        a0, b0 = 1 + i * segments, 1 + (i + 1) * segments
        for j in range(segments):
            j1 = (j + 1) % segments
            f.append((a0 + j, a0 + j1, b0 + j1))
            f.append((a0 + j, b0 + j1, b0 + j))
    last = 1 + (rings - 2) * segments
    for j in range(segments):
        f.append((last + j, last + (j + 1) % segments, top))
    v = np.array(verts)
    v[:, 2] = np.maximum(v[:, 2], 0.0)
    return TriMesh(v, np.array(f))


def jackal_like_mesh() -> TriMesh:
    """Small four-wheeled ground robot: low chassis, wheels, sensor mast.

    The chassis skirt reaches the floor and encloses the wheels, whose tops
    poke through the deck, so the top-down outline is the chassis rectangle
    and the ground contact coincides with it.
    """
    parts = [
        box_mesh((0.508, 0.430, 0.17), (0.0, 0.0, 0.085)),          # chassis
        box_mesh((0.30, 0.22, 0.05), (-0.02, 0.0, 0.17 + 0.025)),    # top plate
        box_mesh((0.08, 0.08, 0.18), (0.12, 0.0, 0.22 + 0.09)),      # sensor mast
        box_mesh((0.12, 0.10, 0.06), (0.12, 0.0, 0.40 + 0.03)),      # sensor head
    ]
    for x in (-0.13, 0.13):
        for y in (-0.165, 0.165):
            parts.append(wheel_mesh((x, y, 0.098), 0.098, 0.07))
    return merge(parts)
