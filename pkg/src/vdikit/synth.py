"""Deterministic synthetic volumes, matching transfer functions, and cameras.

Presets are piecewise-constant scalar fields (plus optional seeded noise), so
renderer comparisons against ground truth are well conditioned.
"""

from __future__ import annotations

import math

import numpy as np

from .camera import Camera, orbit_camera
from .volume import TransferFunction, Volume, make_volume

PRESETS = ("sphere", "bands", "engineoid")


def _grid(dims: int):
    c = np.arange(dims, dtype=np.float64) + 0.5
    z, y, x = np.meshgrid(c, c, c, indexing="ij")
    return x, y, z


def preset_volume(preset: str, dims: int = 128, seed: int = 0,
                  noise: int = 0) -> Volume:
    """Build a preset volume; identical bytes for identical arguments."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}, have {PRESETS}")
    x, y, z = _grid(dims)
    c = dims / 2.0
    data = np.zeros((dims, dims, dims), dtype=np.uint8)

    if preset == "sphere":
        r = np.sqrt((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2)
        data[r < 0.35 * dims] = 120
        data[r < 0.18 * dims] = 220
    elif preset == "bands":
        band = (z // (dims / 8.0)).astype(np.int64) % 8
        levels = np.array([0, 220, 60, 160, 110, 240, 30, 190], dtype=np.uint8)
        data = levels[band]
    else:  # engineoid: ellipsoid body with bores and a dense cap
        ex = ((x - c) / (0.42 * dims)) ** 2
        ey = ((y - c) / (0.30 * dims)) ** 2
        ez = ((z - c) / (0.35 * dims)) ** 2
        body = ex + ey + ez < 1.0
        data[body] = 180
        for off in (-0.15, 0.15):
            bore = ((x - c - off * dims) ** 2 + (y - c) ** 2) < (0.08 * dims) ** 2
            data[body & bore] = 60
        data[body & (y - c > 0.15 * dims)] = 230

    if noise > 0:
        rng = np.random.default_rng(seed)
        jitter = rng.integers(0, noise + 1, size=data.shape, dtype=np.uint8)
        data = np.where(data > 0, np.minimum(255, data.astype(np.int64) + jitter),
                        data).astype(np.uint8)
    return make_volume(data, "u8", (1.0, 1.0, 1.0))


def preset_tf(preset: str) -> TransferFunction:
    if preset == "sphere":
        return TransferFunction((
            (0.0, 0.0, 0.0, 0.0, 0.0),
            (0.2, 0.0, 0.0, 0.0, 0.0),
            (0.47, 0.2, 0.4, 0.9, 0.35),
            (0.86, 0.9, 0.6, 0.2, 0.8),
            (1.0, 1.0, 0.8, 0.3, 0.9),
        ))
    if preset == "bands":
        return TransferFunction((
            (0.0, 0.0, 0.0, 0.0, 0.0),
            (0.15, 0.1, 0.2, 0.8, 0.25),
            (0.5, 0.2, 0.9, 0.3, 0.5),
            (1.0, 1.0, 0.3, 0.2, 0.85),
        ))
    if preset == "engineoid":
        return TransferFunction((
            (0.0, 0.0, 0.0, 0.0, 0.0),
            (0.1, 0.0, 0.0, 0.0, 0.0),
            (0.3, 0.3, 0.3, 0.7, 0.3),
            (0.72, 0.7, 0.7, 0.6, 0.6),
            (0.95, 1.0, 0.5, 0.2, 0.9),
            (1.0, 1.0, 0.5, 0.2, 0.9),
        ))
    raise ValueError(f"unknown preset {preset!r}, have {PRESETS}")


def preset_camera(vol: Volume, azimuth_deg: float = 0.0,
                  elevation_deg: float = 0.0, viewport=(256, 256),
                  fov_y: float = math.radians(45.0)) -> Camera:
    """Orbit camera framing the whole volume."""
    size = vol.world_size
    center = size / 2.0
    radius = 2.8 * float(size.max())
    half_diag = 0.5 * float(np.linalg.norm(size))
    near = 0.15 * radius
    far = radius + 2.0 * half_diag
    return orbit_camera(center, radius, azimuth_deg, elevation_deg,
                        fov_y=fov_y, near=near, far=far, viewport=viewport)
