"""VDI and acceleration-grid data structures, NDC list-grid index math, file codec.

Memory layout: per-pixel supersegment lists live in two dense arrays,
  counts : (height, width) int32, number of valid supersegments per list
  segs   : (height, width, n_sg, 6) float32 -- front, back, r, g, b, a
with colors premultiplied and depths stored as NDC z of the generation camera.
Row 0 is the NDC y = -1 row (see camera module conventions).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .camera import Camera

MAGIC = b"VDI1"
VERSION = 1

# segment array channel indices
F, B, R, G, BCH, A = 0, 1, 2, 3, 4, 5


class BadMagic(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


class TruncatedStream(ValueError):
    pass


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class AccelGrid:
    """Per-cell supersegment counts over a frustum-aligned grid.

    x/y cells are uniform in NDC; z slabs are uniform in *view-space* depth
    between near and far (larger NDC extent near the camera).
    """

    dims: tuple[int, int, int]        # (gx, gy, gz)
    counts: np.ndarray                # (gz, gy, gx) uint32
    near: float
    far: float

    @property
    def z_slabs(self) -> np.ndarray:
        gz = self.dims[2]
        return np.linspace(self.near, self.far, gz + 1)


@dataclass(frozen=True)
class Vdi:
    width: int
    height: int
    n_sg: int
    counts: np.ndarray                # (height, width) int32
    segs: np.ndarray                  # (height, width, n_sg, 6) float32
    gen_camera: Camera
    volume_aabb: np.ndarray           # (2, 3) float64

    def list_at(self, lx: int, ly: int) -> np.ndarray:
        """Valid supersegments of list (lx, ly) as an (n, 6) view."""
        return self.segs[ly, lx, : self.counts[ly, lx]]


def default_grid_dims(width: int, height: int, gz: int = 32) -> tuple[int, int, int]:
    """One cell per 16x16 block of lists, 32 z-slabs; minimum 1 per axis."""
    return (max(1, width // 16), max(1, height // 16), max(1, gz))


def list_cell_of(ndc_xy, width: int, height: int) -> tuple[int, int]:
    """List-grid cell of an NDC (x, y) point; cells are 2/width x 2/height."""
    cx = int(math.floor((ndc_xy[0] + 1.0) * width / 2.0))
    cy = int(math.floor((ndc_xy[1] + 1.0) * height / 2.0))
    return (min(max(cx, 0), width - 1), min(max(cy, 0), height - 1))


def ndc_z_to_view_depth(cam: Camera, ndc_z: float) -> float:
    """Distance from the eye along -z for a given NDC z."""
    n, f = cam.near, cam.far
    a = -(f + n) / (f - n)
    b = -2.0 * f * n / (f - n)
    # ndc_z = (a*z + b) / (-z)  =>  z = b / (-ndc_z - a);  depth = -z
    return -b / (-ndc_z - a)


def view_depth_to_ndc_z(cam: Camera, depth: float) -> float:
    n, f = cam.near, cam.far
    a = -(f + n) / (f - n)
    b = -2.0 * f * n / (f - n)
    z = -depth
    return (a * z + b) / (-z)


def grid_cell_of(ndc_pt, grid: AccelGrid, cam: Camera) -> tuple[int, int, int]:
    """Acceleration-grid cell of an NDC point: x, y by NDC, z by view-depth slab."""
    gx, gy, gz = grid.dims
    cx = min(max(int(math.floor((ndc_pt[0] + 1.0) * gx / 2.0)), 0), gx - 1)
    cy = min(max(int(math.floor((ndc_pt[1] + 1.0) * gy / 2.0)), 0), gy - 1)
    depth = ndc_z_to_view_depth(cam, float(ndc_pt[2]))
    cz = int(math.floor((depth - grid.near) / (grid.far - grid.near) * gz))
    return (cx, cy, min(max(cz, 0), gz - 1))


def validate_vdi(vdi: Vdi) -> None:
    """Check list ordering/disjointness and value ranges; raise InvariantViolation."""
    counts = vdi.counts
    if counts.min() < 0 or counts.max() > vdi.n_sg:
        raise InvariantViolation("list count out of [0, n_sg]")
    for ly in range(vdi.height):
        for lx in range(vdi.width):
            n = counts[ly, lx]
            if n == 0:
                continue
            s = vdi.segs[ly, lx, :n]
            if not np.all(s[:, F] < s[:, B]):
                raise InvariantViolation(f"list ({lx},{ly}): front >= back")
            if n > 1 and not np.all(s[:-1, B] <= s[1:, F] + 1e-7):
                raise InvariantViolation(f"list ({lx},{ly}): overlapping supersegments")
            if s[:, F].min() < -1.0 - 1e-6 or s[:, B].max() > 1.0 + 1e-6:
                raise InvariantViolation(f"list ({lx},{ly}): depth outside [-1, 1]")
            if np.any(s[:, R:A].max(axis=1) > s[:, A] + 1e-6):
                raise InvariantViolation(f"list ({lx},{ly}): color not premultiplied")


_HEADER = struct.Struct("<4sIIII")          # magic, version, width, height, n_sg
_CAMERA = struct.Struct("<10d")             # pos3, quat4, fov_y, near, far
_AABB = struct.Struct("<6d")
_GRID_DIMS = struct.Struct("<3I")


def encode_vdi(vdi: Vdi, grid: AccelGrid) -> bytes:
    """Serialize to the little-endian VDI1 format (bit-exact round trip)."""
    cam = vdi.gen_camera
    parts = [
        _HEADER.pack(MAGIC, VERSION, vdi.width, vdi.height, vdi.n_sg),
        _CAMERA.pack(*cam.position, *cam.orientation, cam.fov_y, cam.near, cam.far),
        _AABB.pack(*vdi.volume_aabb[0], *vdi.volume_aabb[1]),
        _GRID_DIMS.pack(*grid.dims),
        vdi.counts.astype("<u2").tobytes(),
    ]
    packed = np.concatenate(
        [vdi.segs[ly, lx, : vdi.counts[ly, lx]]
         for ly in range(vdi.height) for lx in range(vdi.width)]
        or [np.empty((0, 6), dtype=np.float32)]
    )
    parts.append(packed.astype("<f4").tobytes())
    parts.append(grid.counts.astype("<u4").tobytes())
    return b"".join(parts)


def decode_vdi(data: bytes) -> tuple[Vdi, AccelGrid]:
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise TruncatedStream(f"need {off + n} bytes, have {len(data)}")
        chunk = data[off : off + n]
        off += n
        return chunk

    magic, version, width, height, n_sg = _HEADER.unpack(take(_HEADER.size))
    if magic != MAGIC:
        raise BadMagic(repr(magic))
    if version != VERSION:
        raise VersionMismatch(f"version {version}, expected {VERSION}")
    camvals = _CAMERA.unpack(take(_CAMERA.size))
    aabbvals = _AABB.unpack(take(_AABB.size))
    gdims = _GRID_DIMS.unpack(take(_GRID_DIMS.size))
    counts = (
        np.frombuffer(take(2 * width * height), dtype="<u2")
        .reshape(height, width)
        .astype(np.int32)
    )
    total = int(counts.sum())
    packed = np.frombuffer(take(24 * total), dtype="<f4").reshape(total, 6)
    gcounts = (
        np.frombuffer(take(4 * gdims[0] * gdims[1] * gdims[2]), dtype="<u4")
        .reshape(gdims[2], gdims[1], gdims[0])
        .copy()
    )
    if off != len(data):
        raise TruncatedStream(f"{len(data) - off} trailing bytes")

    segs = np.zeros((height, width, n_sg, 6), dtype=np.float32)
    k = 0
    for ly in range(height):
        for lx in range(width):
            n = counts[ly, lx]
            if n > n_sg:
                raise InvariantViolation(f"list ({lx},{ly}) count {n} > n_sg {n_sg}")
            segs[ly, lx, :n] = packed[k : k + n]
            k += n

    cam = Camera(
        position=camvals[0:3],
        orientation=camvals[3:7],
        fov_y=camvals[7],
        near=camvals[8],
        far=camvals[9],
        viewport=(width, height),
    )
    aabb = np.array(aabbvals, dtype=np.float64).reshape(2, 3)
    vdi = Vdi(width=width, height=height, n_sg=n_sg, counts=counts, segs=segs,
              gen_camera=cam, volume_aabb=aabb)
    grid = AccelGrid(dims=gdims, counts=gcounts, near=cam.near, far=cam.far)
    validate_vdi(vdi)
    return vdi, grid


def save_vdi(vdi: Vdi, grid: AccelGrid, path: str) -> None:
    with open(path, "wb") as f:
        f.write(encode_vdi(vdi, grid))


def load_vdi(path: str) -> tuple[Vdi, AccelGrid]:
    with open(path, "rb") as f:
        return decode_vdi(f.read())
