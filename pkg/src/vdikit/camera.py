"""Perspective camera and world <-> NDC transforms.

Conventions (used everywhere, file formats included):
  * right-handed view space, camera looking down -z
  * NDC is [-1, 1]^3; view-space z = -near maps to NDC z = -1, z = -far to +1
  * quaternion (qx, qy, qz, qw) is the camera-to-world rotation
  * pixel centers at (ix + 0.5, iy + 0.5); iy = 0 is the NDC y = -1 row
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class DegenerateW(ValueError):
    """Clip-space w vanished: point on the camera plane through the eye."""


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z + w * w)
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray):
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return (x, y, z, w)


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]  # (qx, qy, qz, qw), unit
    fov_y: float                                    # radians
    near: float
    far: float
    viewport: tuple[int, int]                       # (w, h) pixels

    def __post_init__(self):
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")

    @property
    def aspect(self) -> float:
        w, h = self.viewport
        return w / h

    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation matrix (columns: right, up, -view)."""
        return quat_to_matrix(self.orientation)

    def view_dir(self) -> np.ndarray:
        return -self.rotation()[:, 2]

    def view_matrix(self) -> np.ndarray:
        r = self.rotation()
        m = np.eye(4)
        m[:3, :3] = r.T
        m[:3, 3] = -r.T @ np.asarray(self.position, dtype=np.float64)
        return m

    def projection_matrix(self) -> np.ndarray:
        f = 1.0 / math.tan(self.fov_y / 2)
        n, fa = self.near, self.far
        m = np.zeros((4, 4))
        m[0, 0] = f / self.aspect
        m[1, 1] = f
        m[2, 2] = -(fa + n) / (fa - n)
        m[2, 3] = -2 * fa * n / (fa - n)
        m[3, 2] = -1.0
        return m

    def proj_view(self) -> np.ndarray:
        return self.projection_matrix() @ self.view_matrix()

    def inv_proj_view(self) -> np.ndarray:
        return np.linalg.inv(self.proj_view())

    def to_pose_dict(self) -> dict:
        return {
            "position": list(self.position),
            "orientation": list(self.orientation),
            "fov_y": self.fov_y,
            "near": self.near,
            "far": self.far,
        }

    @staticmethod
    def from_pose_dict(d: dict, viewport) -> "Camera":
        return Camera(
            position=tuple(float(v) for v in d["position"]),
            orientation=tuple(float(v) for v in d["orientation"]),
            fov_y=float(d["fov_y"]),
            near=float(d["near"]),
            far=float(d["far"]),
            viewport=(int(viewport[0]), int(viewport[1])),
        )


@dataclass
class Ray:
    origin: np.ndarray
    dir: np.ndarray            # unit
    t_near: float = 0.0
    t_far: float = math.inf


def world_to_ndc(cam: Camera, p) -> np.ndarray:
    """Project a world point through view + perspective + w-divide."""
    h = cam.proj_view() @ np.array([p[0], p[1], p[2], 1.0])
    if abs(h[3]) < 1e-12:
        raise DegenerateW(f"clip w = {h[3]}")
    return h[:3] / h[3]


def ndc_to_world(cam: Camera, ndc) -> np.ndarray:
    h = cam.inv_proj_view() @ np.array([ndc[0], ndc[1], ndc[2], 1.0])
    if abs(h[3]) < 1e-12:
        raise DegenerateW(f"inverse clip w = {h[3]}")
    return h[:3] / h[3]


def generate_ray(cam: Camera, pixel) -> Ray:
    """Ray from the eye through the center of pixel (ix, iy); iy=0 at NDC y=-1."""
    ix, iy = pixel
    w, h = cam.viewport
    ndc_x = 2.0 * (ix + 0.5) / w - 1.0
    ndc_y = 2.0 * (iy + 0.5) / h - 1.0
    p_near = ndc_to_world(cam, (ndc_x, ndc_y, -1.0))
    origin = np.asarray(cam.position, dtype=np.float64)
    d = p_near - origin
    d /= np.linalg.norm(d)
    return Ray(origin=origin, dir=d)


def clip_ray(ray: Ray, box) -> tuple[float, float] | None:
    """Slab-method ray/AABB intersection; None on miss.

    box: (2, 3) array-like [min; max]. Returns raw (t_entry, t_exit); callers
    clamp to t >= 0 as needed.
    """
    box = np.asarray(box, dtype=np.float64)
    t0, t1 = -math.inf, math.inf
    for a in range(3):
        o, d = ray.origin[a], ray.dir[a]
        if abs(d) < 1e-300:
            if o < box[0, a] or o > box[1, a]:
                return None
            continue
        ta = (box[0, a] - o) / d
        tb = (box[1, a] - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
    if t1 < t0:
        return None
    return (t0, t1)


def clip_ray_frustum(ray: Ray, cam: Camera) -> tuple[float, float] | None:
    """Intersect a ray with a camera's view frustum via homogeneous clipping."""
    m = cam.proj_view()
    p0 = m @ np.array([*ray.origin, 1.0])
    pd = m @ np.array([*ray.dir, 0.0])
    t0, t1 = -math.inf, math.inf
    # conditions: w > 0 and -w <= c <= w for c in (x, y, z)
    conds = [(p0[3], pd[3])]
    for a in range(3):
        conds.append((p0[3] - p0[a], pd[3] - pd[a]))  # c <= w
        conds.append((p0[3] + p0[a], pd[3] + pd[a]))  # c >= -w
    for c, d in conds:
        # require c + t*d >= 0
        if abs(d) < 1e-300:
            if c < 0:
                return None
            continue
        t = -c / d
        if d > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
    if t1 < t0:
        return None
    return (t0, t1)


def look_at(position, target, up=(0.0, 1.0, 0.0), *, fov_y, near, far, viewport) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    right /= np.linalg.norm(right)
    upv = np.cross(right, fwd)
    r = np.stack([right, upv, -fwd], axis=1)  # camera-to-world
    return Camera(
        position=tuple(position),
        orientation=matrix_to_quat(r),
        fov_y=fov_y,
        near=near,
        far=far,
        viewport=tuple(viewport),
    )


def orbit_camera(center, radius, azimuth_deg, elevation_deg=0.0, *, fov_y, near, far,
                 viewport) -> Camera:
    """Camera on an orbit around `center`, always facing it."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    center = np.asarray(center, dtype=np.float64)
    offset = radius * np.array(
        [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
    )
    return look_at(center + offset, center, fov_y=fov_y, near=near, far=far,
                   viewport=viewport)


def save_camera(cam: Camera, path: str) -> None:
    with open(path, "w") as f:
        json.dump(cam.to_pose_dict(), f, indent=2)


def load_camera(path: str, viewport) -> Camera:
    with open(path) as f:
        return Camera.from_pose_dict(json.load(f), viewport)


def save_camera_path(cams, path: str) -> None:
    with open(path, "w") as f:
        json.dump([c.to_pose_dict() for c in cams], f, indent=2)


def load_camera_path(path: str, viewport) -> list[Camera]:
    with open(path) as f:
        return [Camera.from_pose_dict(d, viewport) for d in json.load(f)]
