"""Shared fixtures: small synthetic scenes and generated VDIs, built once."""

import numpy as np
import pytest

from vdikit import GenParams, generate_vdi, preset_camera, preset_tf, preset_volume


@pytest.fixture(scope="session")
def sphere64():
    vol = preset_volume("sphere", 64)
    return vol, preset_tf("sphere")


@pytest.fixture(scope="session")
def bands64():
    vol = preset_volume("bands", 64)
    return vol, preset_tf("bands")


@pytest.fixture(scope="session")
def sphere128():
    vol = preset_volume("sphere", 128)
    return vol, preset_tf("sphere")


@pytest.fixture(scope="session")
def bands128():
    vol = preset_volume("bands", 128)
    return vol, preset_tf("bands")


@pytest.fixture(scope="session")
def sphere_vdi_small(sphere64):
    vol, tf = sphere64
    cam = preset_camera(vol, 0, 0, viewport=(128, 128))
    vdi, grid, stats = generate_vdi(vol, tf, cam, GenParams(n_sg=12),
                                    with_stats=True)
    return vol, tf, cam, vdi, grid, stats


@pytest.fixture(scope="session")
def sphere_vdi(sphere128):
    vol, tf = sphere128
    cam = preset_camera(vol, 0, 0, viewport=(256, 256))
    vdi, grid, stats = generate_vdi(vol, tf, cam, GenParams(n_sg=12),
                                    with_stats=True)
    return vol, tf, cam, vdi, grid, stats


@pytest.fixture(scope="session")
def bands_vdi(bands128):
    vol, tf = bands128
    cam = preset_camera(vol, 0, 0, viewport=(256, 256))
    vdi, grid, stats = generate_vdi(vol, tf, cam, GenParams(n_sg=12),
                                    with_stats=True)
    return vol, tf, cam, vdi, grid, stats


def brute_force_grid_recount(vdi, grid):
    """Independent per-cell recount of supersegment overlaps (the grid oracle)."""
    from vdikit.vdi import ndc_z_to_view_depth

    cam = vdi.gen_camera
    gx, gy, gz = grid.dims
    recount = np.zeros((gz, gy, gx), dtype=np.int64)
    slabs = grid.z_slabs
    for ly in range(vdi.height):
        y0 = -1 + 2 * ly / vdi.height
        y1 = -1 + 2 * (ly + 1) / vdi.height
        for lx in range(vdi.width):
            x0 = -1 + 2 * lx / vdi.width
            x1 = -1 + 2 * (lx + 1) / vdi.width
            for k in range(vdi.counts[ly, lx]):
                f, b = vdi.segs[ly, lx, k, 0], vdi.segs[ly, lx, k, 1]
                d0 = ndc_z_to_view_depth(cam, float(f))
                d1 = ndc_z_to_view_depth(cam, float(b))
                for cz in range(gz):
                    # half-open slabs [z_k, z_{k+1})
                    if d1 < slabs[cz] or d0 >= slabs[cz + 1]:
                        continue
                    for cy in range(gy):
                        if y1 <= -1 + 2 * cy / gy or y0 >= -1 + 2 * (cy + 1) / gy:
                            continue
                        for cx in range(gx):
                            if x1 <= -1 + 2 * cx / gx or x0 >= -1 + 2 * (cx + 1) / gx:
                                continue
                            recount[cz, cy, cx] += 1
    return recount


def random_vdi(rng, width=32, height=32, n_sg=8, fill=0.6):
    """A synthetic but invariant-respecting VDI with a consistent grid."""
    from vdikit import AccelGrid, Camera, Vdi
    from vdikit.generate import _accumulate_grid, _depth_consts
    from vdikit.vdi import default_grid_dims

    cam = Camera(position=(0.0, 0.0, 5.0), orientation=(0, 0, 0, 1),
                 fov_y=0.8, near=1.0, far=20.0, viewport=(width, height))
    counts = np.zeros((height, width), dtype=np.int32)
    segs = np.zeros((height, width, n_sg, 6), dtype=np.float32)
    for ly in range(height):
        for lx in range(width):
            if rng.random() > fill:
                continue
            n = int(rng.integers(1, n_sg + 1))
            edges = np.sort(rng.uniform(-1.0, 1.0, size=2 * n)).astype(np.float32)
            while np.any(np.diff(edges) <= 0):
                edges = np.sort(rng.uniform(-1, 1, size=2 * n)).astype(np.float32)
            counts[ly, lx] = n
            for k in range(n):
                a = rng.uniform(0.05, 1.0)
                rgb = rng.uniform(0.0, 1.0, size=3) * a
                segs[ly, lx, k] = [edges[2 * k], edges[2 * k + 1], *rgb, a]
    gx, gy, gz = default_grid_dims(width, height)
    gcounts = np.zeros((gz, gy, gx), dtype=np.uint32)
    pa, pb = _depth_consts(cam)
    _accumulate_grid(counts, segs, width, height, gx, gy, gz,
                     cam.near, cam.far, pa, pb, gcounts)
    aabb = np.array([[-2.0, -2.0, 1.0], [2.0, 2.0, 4.0]])
    vdi = Vdi(width=width, height=height, n_sg=n_sg, counts=counts, segs=segs,
              gen_camera=cam, volume_aabb=aabb)
    grid = AccelGrid(dims=(gx, gy, gz), counts=gcounts, near=cam.near,
                     far=cam.far)
    return vdi, grid
