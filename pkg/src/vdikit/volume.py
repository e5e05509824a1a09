"""Volume datasets and transfer functions.

A volume is a dense scalar brick (uint8 or uint16) with per-axis spacing.
Scalars are normalized by the voxel-type maximum (255 or 65535) at sampling
time, then classified through a piecewise-linear RGBA lookup table
(post-classification: interpolate first, classify second).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from numba import njit

VOXEL_DTYPES = {"u8": np.uint8, "u16": np.uint16}
VOXEL_MAX = {"u8": 255.0, "u16": 65535.0}


class SizeMismatch(ValueError):
    """Raw file length disagrees with the sidecar metadata."""


class UnsupportedVoxelType(ValueError):
    pass


@dataclass(frozen=True)
class Volume:
    dims: tuple[int, int, int]              # (nx, ny, nz)
    voxel_type: str                         # "u8" | "u16"
    spacing: tuple[float, float, float]     # world units per voxel
    data: np.ndarray                        # raw scalars, shape (nz, ny, nx)
    value_range: tuple[float, float]
    # normalized float32 copy used by all sampling kernels
    normalized: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(self.dims) < 2:
            raise ValueError("dims components must be >= 2 for trilinear sampling")
        if min(self.spacing) <= 0:
            raise ValueError("spacing components must be > 0")
        if self.data.size != nx * ny * nz:
            raise SizeMismatch(f"data has {self.data.size} voxels, dims say {nx*ny*nz}")
        if self.normalized is None:
            norm = self.data.astype(np.float32) / VOXEL_MAX[self.voxel_type]
            object.__setattr__(self, "normalized", norm)

    @property
    def world_size(self) -> np.ndarray:
        """Physical extent: dims * spacing, AABB is [0, world_size]."""
        return np.array(self.dims, dtype=np.float64) * np.array(self.spacing)

    @property
    def aabb(self) -> np.ndarray:
        """(2, 3) world-space bounding box [min; max]."""
        return np.stack([np.zeros(3), self.world_size])


def make_volume(data: np.ndarray, voxel_type: str, spacing=(1.0, 1.0, 1.0)) -> Volume:
    """Wrap a (nz, ny, nx) scalar array as a Volume."""
    if voxel_type not in VOXEL_DTYPES:
        raise UnsupportedVoxelType(voxel_type)
    data = np.ascontiguousarray(data, dtype=VOXEL_DTYPES[voxel_type])
    nz, ny, nx = data.shape
    return Volume(
        dims=(nx, ny, nz),
        voxel_type=voxel_type,
        spacing=tuple(float(s) for s in spacing),
        data=data,
        value_range=(float(data.min()), float(data.max())),
    )


def load_raw_volume(path: str, meta: dict) -> Volume:
    """Load a headerless little-endian scalar brick, x-fastest order.

    meta: {"dims": [nx, ny, nz], "voxel_type": "u8"|"u16", "spacing": [sx, sy, sz]}
    """
    voxel_type = meta["voxel_type"]
    if voxel_type not in VOXEL_DTYPES:
        raise UnsupportedVoxelType(voxel_type)
    nx, ny, nz = (int(d) for d in meta["dims"])
    dtype = np.dtype(VOXEL_DTYPES[voxel_type]).newbyteorder("<")
    expected = nx * ny * nz * dtype.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise SizeMismatch(f"{path}: {actual} bytes, expected {expected}")
    flat = np.fromfile(path, dtype=dtype)
    data = flat.reshape(nz, ny, nx)  # x-fastest
    return make_volume(data, voxel_type, tuple(float(s) for s in meta["spacing"]))


def load_volume_with_sidecar(meta_path: str) -> Volume:
    """Load a volume from its JSON sidecar; raw path is `raw` or derived from stem."""
    with open(meta_path) as f:
        meta = json.load(f)
    raw = meta.get("raw")
    if raw is None:
        raw = os.path.splitext(meta_path)[0] + ".raw"
    elif not os.path.isabs(raw):
        raw = os.path.join(os.path.dirname(meta_path), raw)
    return load_raw_volume(raw, meta)


def save_raw_volume(vol: Volume, raw_path: str, meta_path: str | None = None) -> None:
    vol.data.astype(np.dtype(VOXEL_DTYPES[vol.voxel_type]).newbyteorder("<")).tofile(raw_path)
    if meta_path is not None:
        with open(meta_path, "w") as f:
            json.dump(
                {
                    "dims": list(vol.dims),
                    "voxel_type": vol.voxel_type,
                    "spacing": list(vol.spacing),
                    "raw": os.path.basename(raw_path),
                },
                f,
                indent=2,
            )


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear RGBA map over normalized scalar [0, 1], baked to a LUT."""

    control_points: tuple  # ((s, r, g, b, a), ...) sorted, s from 0 to 1
    resolution: int = 256
    lut: np.ndarray = field(repr=False, default=None)  # (resolution, 4) float32

    def __post_init__(self):
        pts = [tuple(float(v) for v in p) for p in self.control_points]
        s = [p[0] for p in pts]
        if s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("first control point must be at 0, last at 1")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("control points must be strictly ascending in scalar")
        object.__setattr__(self, "control_points", tuple(pts))
        if self.lut is None:
            xs = np.linspace(0.0, 1.0, self.resolution)
            arr = np.array(pts)
            lut = np.stack(
                [np.interp(xs, arr[:, 0], arr[:, 1 + c]) for c in range(4)], axis=1
            ).astype(np.float32)
            object.__setattr__(self, "lut", np.clip(lut, 0.0, 1.0))

    @staticmethod
    def from_json(path: str) -> "TransferFunction":
        with open(path) as f:
            spec = json.load(f)
        return TransferFunction(tuple(tuple(p) for p in spec["points"]))

    def to_json(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump({"points": [list(p) for p in self.control_points]}, f, indent=2)

    def classify(self, scalar: float) -> np.ndarray:
        """LUT lookup with linear interpolation between entries."""
        return _lut_classify(self.lut, float(scalar))


@njit(cache=True, inline="always")
def _lut_classify(lut, s):
    n = lut.shape[0]
    x = s * (n - 1)
    if x <= 0.0:
        return lut[0].copy()
    if x >= n - 1:
        return lut[n - 1].copy()
    i = int(x)
    f = x - i
    out = np.empty(4, dtype=np.float32)
    for c in range(4):
        out[c] = lut[i, c] * (1.0 - f) + lut[i + 1, c] * f
    return out


@njit(cache=True, inline="always")
def _trilinear(vol, px, py, pz):
    """Sample normalized volume (nz, ny, nx) at normalized coords in [0,1]^3."""
    nz, ny, nx = vol.shape
    gx = px * (nx - 1)
    gy = py * (ny - 1)
    gz = pz * (nz - 1)
    ix = int(gx)
    iy = int(gy)
    iz = int(gz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    fx = gx - ix
    fy = gy - iy
    fz = gz - iz
    c00 = vol[iz, iy, ix] * (1 - fx) + vol[iz, iy, ix + 1] * fx
    c10 = vol[iz, iy + 1, ix] * (1 - fx) + vol[iz, iy + 1, ix + 1] * fx
    c01 = vol[iz + 1, iy, ix] * (1 - fx) + vol[iz + 1, iy, ix + 1] * fx
    c11 = vol[iz + 1, iy + 1, ix] * (1 - fx) + vol[iz + 1, iy + 1, ix + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


@njit(cache=True, inline="always")
def _sample_classified(vol, lut, px, py, pz):
    return _lut_classify(lut, _trilinear(vol, px, py, pz))


def sample_classified(vol: Volume, tf: TransferFunction, p) -> np.ndarray:
    """Trilinear scalar interpolation at normalized p in [0,1]^3, then classification.

    Returns non-premultiplied RGBA in [0,1]^4. Out-of-range p is the caller's error.
    """
    px, py, pz = (float(v) for v in p)
    return _sample_classified(vol.normalized, tf.lut, px, py, pz)


def grayscale_tf(alpha: float = 1.0) -> TransferFunction:
    """Identity grayscale ramp, constant opacity; handy default."""
    return TransferFunction(((0.0, 0, 0, 0, 0.0), (1.0, 1, 1, 1, alpha)))
