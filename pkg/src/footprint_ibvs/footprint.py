"""Footprint recovery from an overhead silhouette and label generation.

The overhead view is a distant pinhole camera looking straight down. The
silhouette outline is traced along pixel edges, every outline corner is cast
back as a ray and intersected with the ground plane, and the resulting world
polygon is simplified and stored in the robot body frame so a single
footprint serves every frame of a dataset.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import BadParamsError, BehindCameraError, EmptyMaskError, NoHitError
from .geometry import (AABB2D, Camera, CameraIntrinsics, Frame, GroundPlane, Polygon2D,
                       Pose3, convex_hull, intersect_ground, project_points,
                       unproject_pixels)
from .mesh import RobotPose, TriMesh
from .render import RenderedFrame, silhouette_bbox

DEFAULT_OVERHEAD_HEIGHT = 20.0
DEFAULT_RESOLUTION = 512
DEFAULT_HALF_EXTENT = 0.512


class FootprintSource(str, enum.Enum):
    OVERHEAD_SILHOUETTE = "OVERHEAD_SILHOUETTE"
    MESH_ORACLE = "MESH_ORACLE"


@dataclass(frozen=True)
class Footprint:
    polygon: Polygon2D
    source: FootprintSource


@dataclass(frozen=True, eq=False)
class FrameLabel:
    footprint_poly: Polygon2D
    footprint_mask: np.ndarray
    bbox: AABB2D
    frame_id: str


class LabelError(Exception):
    """Label generation failed for one frame; ``frame_id`` says which."""

    def __init__(self, frame_id: str, cause: Exception):
        super().__init__(f"frame {frame_id}: {cause}")
        self.frame_id = frame_id
        self.cause = cause


def synth_overhead_camera(center: Sequence[float], height: float = DEFAULT_OVERHEAD_HEIGHT,
                          resolution: int = DEFAULT_RESOLUTION,
                          half_extent: float = DEFAULT_HALF_EXTENT,
                          robot_height: Optional[float] = None) -> Camera:
    """Downward camera whose image spans ``center +- half_extent`` on z = 0.

    Image u follows world +x and image v follows world -y.
    """
    if not (height > 0 and half_extent > 0 and resolution > 0):
        raise BadParamsError("height, resolution and half_extent must be positive")
    if robot_height is not None and not height > 10.0 * robot_height:
        raise BadParamsError("overhead camera must be > 10x the robot height")
    f = height * resolution / (2.0 * half_extent)
    c = resolution / 2.0
    intr = CameraIntrinsics(f, f, c, c, resolution, resolution)
    R = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    C = np.array([center[0], center[1], height], dtype=np.float64)
    return Camera(intr, Pose3(R, -R @ C))


# --------------------------------------------------------------------------
# contour tracing

_TOP, _RIGHT, _BOTTOM, _LEFT = range(4)


def _largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        raise EmptyMaskError("mask has no set pixels")
    if n == 1:
        comp = labels == 1
    else:
        sizes = np.bincount(labels.ravel())[1:]
        comp = labels == (int(np.argmax(sizes)) + 1)
    return ndimage.binary_fill_holes(comp)


def _boundary_edges(comp: np.ndarray) -> Dict[Tuple[int, int], List[Tuple[int, int]]]:
    """Directed pixel-edge cracks with the foreground on their left."""
    p = np.pad(comp, 1)
    core = p[1:-1, 1:-1]
    out: Dict[Tuple[int, int], List[Tuple[int, int]]] = defaultdict(list)
    sides = [
        (~p[:-2, 1:-1], (0, 0), (1, 0)),      # top:    (c, r) -> (c+1, r)
        (~p[1:-1, 2:], (1, 0), (1, 1)),       # right:  (c+1, r) -> (c+1, r+1)
        (~p[2:, 1:-1], (1, 1), (0, 1)),       # bottom: (c+1, r+1) -> (c, r+1)
        (~p[1:-1, :-2], (0, 1), (0, 0)),      # left:   (c, r+1) -> (c, r)
    ]
    for open_side, (a0, a1), (b0, b1) in sides:
        rs, cs = np.nonzero(core & open_side)
        for r, c in zip(rs.tolist(), cs.tolist()):
            out[(c + a0, r + a1)].append((c + b0, r + b1))
    return out


def _trace(edges: Dict[Tuple[int, int], List[Tuple[int, int]]]) -> List[Tuple[int, int]]:
    start = min(edges, key=lambda q: (q[1], q[0]))
    # the top-left-most corner always starts a top crack heading +u
    first = (start[0] + 1, start[1]) if (start[0] + 1, start[1]) in edges[start] else edges[start][0]
    path = [start]
    prev, cur = start, first
    used = {(start, first)}
    while cur != start:
        path.append(cur)
        opts = edges[cur]
        if len(opts) == 1:
            nxt = opts[0]
        else:
            # pinch corner: keep diagonal neighbours linked (8-connectivity)
            din = (cur[0] - prev[0], cur[1] - prev[1])
            nxt = None
            for cand in opts:
                dout = (cand[0] - cur[0], cand[1] - cur[1])
                if din[0] * dout[1] - din[1] * dout[0] < 0 and (cur, cand) not in used:
                    nxt = cand
            if nxt is None:
                nxt = next(c for c in opts if (cur, c) not in used)
        used.add((cur, nxt))
        prev, cur = cur, nxt
    return path


def _merge_collinear(path: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    n = len(path)
    keep = []
    for i in range(n):
        a, b, c = path[i - 1], path[i], path[(i + 1) % n]
        if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) != 0:
            keep.append(b)
    return keep


def extract_contour(mask: np.ndarray) -> Polygon2D:
    """Outer boundary of the largest 8-connected blob, at pixel corners.

    Vertices are integer pixel-corner coordinates (u, v) starting at the
    top-left-most corner; runs of collinear cracks are merged.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("mask has no set pixels")
    comp = _largest_component(mask)
    path = _merge_collinear(_trace(_boundary_edges(comp)))
    return Polygon2D(np.array(path, dtype=np.float64), Frame.IMAGE_PIXELS)


# --------------------------------------------------------------------------
# simplification

def _dp_open(pts: np.ndarray, eps: float, keep: np.ndarray, lo: int, hi: int) -> None:
    stack = [(lo, hi)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = pts[i], pts[j]
        seg = pts[i + 1:j]
        d = b - a
        L = math.hypot(d[0], d[1])
        if L == 0.0:
            dist = np.hypot(seg[:, 0] - a[0], seg[:, 1] - a[1])
        else:
            dist = np.abs(d[0] * (seg[:, 1] - a[1]) - d[1] * (seg[:, 0] - a[0])) / L
        k = int(np.argmax(dist))
        if dist[k] > eps:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))


def douglas_peucker_closed(pts: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring.

    The ring is split at vertex 0 and the vertex farthest from it; both
    anchors are always kept, so the kept set shrinks monotonically as
    ``eps`` grows.
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    if n <= 3 or eps <= 0:
        return pts.copy()
    far = int(np.argmax(np.hypot(pts[:, 0] - pts[0, 0], pts[:, 1] - pts[0, 1])))
    ring = np.vstack([pts, pts[:1]])
    keep = np.zeros(n + 1, dtype=bool)
    keep[0] = keep[far] = keep[n] = True
    _dp_open(ring, eps, keep, 0, far)
    _dp_open(ring, eps, keep, far, n)
    out = ring[:n][keep[:n]]
    if len(out) < 3:
        # both chains collapsed; keep the farthest point of each half
        return pts[sorted({0, far, _farthest_from_chord(pts, 0, far)})]
    return out


def _farthest_from_chord(pts, i, j) -> int:
    a, b = pts[i], pts[j]
    d = b - a
    dist = np.abs(d[0] * (pts[:, 1] - a[1]) - d[1] * (pts[:, 0] - a[0]))
    dist[[i, j]] = -1
    return int(np.argmax(dist))


# --------------------------------------------------------------------------
# footprint recovery

def footprint_from_overhead(frame: RenderedFrame, cam: Camera, plane: GroundPlane = GroundPlane(),
                            simplify_eps: Optional[float] = None,
                            robot_pose: Optional[RobotPose] = None) -> Footprint:
    """Body-frame footprint from a downward silhouette.

    ``simplify_eps`` defaults to one ground sampling distance at the plane.
    ``robot_pose`` defaults to the pose stored on the frame.
    """
    pose = robot_pose if robot_pose is not None else frame.robot_pose
    if pose is None:
        raise BadParamsError("robot pose used for the overhead render is required")
    contour = extract_contour(frame.mask)
    origin, dirs = unproject_pixels(contour.vertices, cam)
    pts, hit = intersect_ground(origin, dirs, plane)
    if not hit.all():
        raise NoHitError("a contour ray missed the ground plane")
    if simplify_eps is None:
        depth = abs(cam.pose.center[2] - plane.height)
        simplify_eps = depth / cam.intrinsics.fx
    world = douglas_peucker_closed(pts[:, :2], simplify_eps)
    body = pose.world_to_body(world)
    return Footprint(Polygon2D(body, Frame.WORLD_METERS), FootprintSource.OVERHEAD_SILHOUETTE)


def footprint_oracle_from_mesh(mesh: TriMesh) -> Footprint:
    """Convex hull of all mesh vertices dropped onto z = 0."""
    return Footprint(convex_hull(mesh.vertices[:, :2], Frame.WORLD_METERS),
                     FootprintSource.MESH_ORACLE)


def project_footprint(fp: Footprint, pose: RobotPose, cam: Camera) -> Polygon2D:
    world = pose.body_to_world(fp.polygon.vertices)
    P = np.column_stack([world, np.zeros(len(world))])
    uv, ok = project_points(P, cam)
    if not ok.all():
        raise BehindCameraError("footprint vertex behind camera")
    return Polygon2D(uv, Frame.IMAGE_PIXELS)


def polygon_to_mask(poly: Polygon2D, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill sampled at pixel centers, cropped to the image."""
    mask = np.zeros((height, width), dtype=bool)
    a, b = poly.edges()
    ya, yb = a[:, 1], b[:, 1]
    v_lo = max(int(math.floor(poly.vertices[:, 1].min() - 0.5)), 0)
    v_hi = min(int(math.ceil(poly.vertices[:, 1].max() - 0.5)), height - 1)
    centers_u = np.arange(width) + 0.5
    for row in range(v_lo, v_hi + 1):
        y = row + 0.5
        crosses = (ya <= y) != (yb <= y)
        if not crosses.any():
            continue
        xa, xb = a[crosses, 0], b[crosses, 0]
        y0, y1 = ya[crosses], yb[crosses]
        xs = np.sort(xa + (y - y0) * (xb - xa) / (y1 - y0))
        for x0, x1 in zip(xs[0::2], xs[1::2]):
            j0 = max(int(math.ceil(x0 - 0.5)), 0)
            j1 = min(int(math.ceil(x1 - 0.5)), width)
            if j1 > j0:
                mask[row, j0:j1] = True
    return mask


def generate_labels(fp: Footprint, frames: Sequence[RenderedFrame],
                    cams: Dict[str, Camera] | Sequence[Camera],
                    frame_ids: Optional[Sequence[str]] = None) -> List[FrameLabel]:
    """Footprint polygon, mask and silhouette bbox for every frame.

    ``cams`` is either a mapping from camera id to camera or a sequence
    aligned with ``frames``.
    """
    labels = []
    for i, frame in enumerate(frames):
        fid = frame_ids[i] if frame_ids is not None else f"{i:05d}"
        cam = cams[frame.camera_id] if isinstance(cams, dict) else cams[i]
        try:
            if frame.robot_pose is None:
                raise BadParamsError("frame has no robot pose")
            poly = project_footprint(fp, frame.robot_pose, cam)
            k = cam.intrinsics
            fmask = polygon_to_mask(poly, k.width, k.height)
            bbox = silhouette_bbox(frame)
        except (BehindCameraError, EmptyMaskError, BadParamsError) as exc:
            raise LabelError(fid, exc) from exc
        labels.append(FrameLabel(poly, fmask, bbox, fid))
    return labels
