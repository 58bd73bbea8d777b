"""Deterministic z-buffer rasterizer for silhouettes and flat-shaded renders.

Pixel (row i, col j) is sampled at its center (j + 0.5, i + 0.5). A pixel is
covered when the center lies inside the projected triangle according to
edge functions, with the top-left rule deciding centers exactly on an edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numba
import numpy as np

from .errors import EmptyMaskError
from .geometry import AABB2D, Camera
from .mesh import RobotPose, TriMesh, place_robot

NEAR_Z = 1e-6
LIGHT_DIR = np.array([1.0, -1.0, 2.0]) / np.sqrt(6.0)
AMBIENT = 40.0
DIFFUSE = 215.0


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    """One rendered view.

    ``image`` is (H, W) uint8, ``mask`` (H, W) bool and ``depth`` (H, W)
    float64 camera-z in meters with ``inf`` where nothing was hit.
    """

    image: np.ndarray
    mask: np.ndarray
    depth: np.ndarray
    robot_pose: Optional[RobotPose] = None
    camera_id: str = ""

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@numba.njit(cache=True)
def _raster_kernel(tri_uv, tri_invz, tri_val, width, height, want_depth, image, mask, invdepth):
    n = tri_uv.shape[0]
    for k in range(n):
        x0 = tri_uv[k, 0, 0]
        y0 = tri_uv[k, 0, 1]
        x1 = tri_uv[k, 1, 0]
        y1 = tri_uv[k, 1, 1]
        x2 = tri_uv[k, 2, 0]
        y2 = tri_uv[k, 2, 1]
        w0 = tri_invz[k, 0]
        w1 = tri_invz[k, 1]
        w2 = tri_invz[k, 2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        if area < 0.0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            w1, w2 = w2, w1
            area = -area
        umin = max(int(np.floor(min(x0, min(x1, x2)) - 0.5)), 0)
        umax = min(int(np.ceil(max(x0, max(x1, x2)) - 0.5)), width - 1)
        vmin = max(int(np.floor(min(y0, min(y1, y2)) - 0.5)), 0)
        vmax = min(int(np.ceil(max(y0, max(y1, y2)) - 0.5)), height - 1)
        if umin > umax or vmin > vmax:
            continue
        # edge a->b owns its boundary when it is a top or left edge
        dx12, dy12 = x2 - x1, y2 - y1
        dx20, dy20 = x0 - x2, y0 - y2
        dx01, dy01 = x1 - x0, y1 - y0
        own0 = dy12 < 0.0 or (dy12 == 0.0 and dx12 > 0.0)
        own1 = dy20 < 0.0 or (dy20 == 0.0 and dx20 > 0.0)
        own2 = dy01 < 0.0 or (dy01 == 0.0 and dx01 > 0.0)
        inv_area = 1.0 / area
        val = tri_val[k]
        for v in range(vmin, vmax + 1):
            py = v + 0.5
            for u in range(umin, umax + 1):
                px = u + 0.5
                e0 = dx12 * (py - y1) - dy12 * (px - x1)
                if e0 < 0.0 or (e0 == 0.0 and not own0):
                    continue
                e1 = dx20 * (py - y2) - dy20 * (px - x2)
                if e1 < 0.0 or (e1 == 0.0 and not own1):
                    continue
                e2 = dx01 * (py - y0) - dy01 * (px - x0)
                if e2 < 0.0 or (e2 == 0.0 and not own2):
                    continue
                if want_depth:
                    iz = (e0 * w0 + e1 * w1 + e2 * w2) * inv_area
                    if iz > invdepth[v, u]:
                        invdepth[v, u] = iz
                        image[v, u] = val
                        mask[v, u] = True
                else:
                    mask[v, u] = True


def face_intensities(world_vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Flat Lambertian shade per triangle, 8-bit."""
    a = world_vertices[triangles[:, 0]]
    b = world_vertices[triangles[:, 1]]
    c = world_vertices[triangles[:, 2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1)
    lam = np.zeros(len(n))
    ok = norm > 0
    lam[ok] = np.maximum(0.0, (n[ok] @ LIGHT_DIR) / norm[ok])
    return np.floor(AMBIENT + DIFFUSE * lam + 0.5).astype(np.uint8)


def _clip_near(tri: np.ndarray) -> list:
    """Sutherland-Hodgman clip of one camera-space triangle to z >= NEAR_Z."""
    out = []
    for i in range(3):
        p, q = tri[i], tri[(i + 1) % 3]
        pin, qin = p[2] >= NEAR_Z, q[2] >= NEAR_Z
        if pin:
            out.append(p)
        if pin != qin:
            s = (NEAR_Z - p[2]) / (q[2] - p[2])
            r = p + s * (q - p)
            r[2] = NEAR_Z
            out.append(r)
    return out


@numba.njit(cache=True)
def _project_unclipped(X, triangles, fx, fy, cx, cy, uv, invz):
    """Project every triangle corner; False as soon as one needs near clipping."""
    for k in range(triangles.shape[0]):
        for c in range(3):
            i = triangles[k, c]
            z = X[i, 2]
            if not z >= NEAR_Z:
                return False
            uv[k, c, 0] = fx * X[i, 0] / z + cx
            uv[k, c, 1] = fy * X[i, 1] / z + cy
            invz[k, c] = 1.0 / z
    return True


def _screen_triangles(world_vertices, triangles, cam: Camera, values):
    """Camera-space transform, near clipping and projection."""
    X = world_vertices @ cam.pose.R.T + cam.pose.t
    intr = cam.intrinsics
    uv = np.empty((len(triangles), 3, 2))
    invz = np.empty((len(triangles), 3))
    if _project_unclipped(X, triangles, intr.fx, intr.fy, intr.cx, intr.cy, uv, invz):
        return uv, invz, values
    T = X[triangles]                         # (N, 3, 3)
    z = T[:, :, 2]
    front = np.all(z >= NEAR_Z, axis=1)
    partial = ~front & np.any(z >= NEAR_Z, axis=1)
    tris = T[front]
    vals = values[front]
    if partial.any():
        extra, extra_vals = [], []
        for tri, val in zip(T[partial], values[partial]):
            poly = _clip_near(tri)
            for k in range(1, len(poly) - 1):
                extra.append((poly[0], poly[k], poly[k + 1]))
                extra_vals.append(val)
        if extra:
            tris = np.concatenate([tris, np.array(extra)])
            vals = np.concatenate([vals, np.array(extra_vals, dtype=values.dtype)])
    zz = tris[:, :, 2]
    uv = np.empty(tris.shape[:2] + (2,))
    uv[:, :, 0] = intr.fx * tris[:, :, 0] / zz + intr.cx
    uv[:, :, 1] = intr.fy * tris[:, :, 1] / zz + intr.cy
    return np.ascontiguousarray(uv), np.ascontiguousarray(1.0 / zz), vals


def rasterize(mesh: TriMesh, cam: Camera, robot_pose: Optional[RobotPose] = None,
              camera_id: str = "") -> RenderedFrame:
    """Render ``mesh`` (already in world coordinates) through ``cam``."""
    k = cam.intrinsics
    W, H = k.width, k.height
    shade = face_intensities(mesh.vertices, mesh.triangles)
    uv, invz, vals = _screen_triangles(mesh.vertices, mesh.triangles, cam, shade)
    image = np.zeros((H, W), dtype=np.uint8)
    mask = np.zeros((H, W), dtype=np.bool_)
    invdepth = np.zeros((H, W))
    if len(uv):
        _raster_kernel(uv, invz, vals, W, H, True, image, mask, invdepth)
    depth = np.full((H, W), np.inf)
    depth[mask] = 1.0 / invdepth[mask]
    return RenderedFrame(image, mask, depth, robot_pose, camera_id)


def render_robot(mesh: TriMesh, pose: RobotPose, cam: Camera, camera_id: str = "") -> RenderedFrame:
    return rasterize(place_robot(mesh, pose), cam, pose, camera_id)


def silhouette(world_vertices: np.ndarray, triangles: np.ndarray, cam: Camera) -> np.ndarray:
    """Coverage mask only; skips shading and depth."""
    k = cam.intrinsics
    mask = np.zeros((k.height, k.width), dtype=np.bool_)
    uv, invz, vals = _screen_triangles(world_vertices, triangles, cam,
                                       np.zeros(len(triangles), dtype=np.uint8))
    if len(uv):
        _raster_kernel(uv, invz, vals, k.width, k.height, False,
                       np.zeros((1, 1), np.uint8), mask, np.zeros((1, 1)))
    return mask


def robot_silhouette(mesh: TriMesh, pose: RobotPose, cam: Camera) -> np.ndarray:
    return silhouette(pose.body_to_world(mesh.vertices), mesh.triangles, cam)


def mask_bbox(mask: np.ndarray) -> AABB2D:
    rows = np.flatnonzero(mask.any(axis=1))
    if len(rows) == 0:
        raise EmptyMaskError("mask has no set pixels")
    cols = np.flatnonzero(mask.any(axis=0))
    return AABB2D(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


def silhouette_bbox(frame: RenderedFrame) -> AABB2D:
    """Tight pixel-index bounds ``(min_u, min_v, max_u, max_v)`` of the mask."""
    return mask_bbox(frame.mask)
