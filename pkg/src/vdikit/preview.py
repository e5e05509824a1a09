"""Preview rendering with dynamic subsampling.

Image resolution is scaled by d_i and each ray is point-sampled instead of
intersected: the chord through the acceleration grid is split at cell
boundaries, each cell gets round(d_r * intersection_length * count) samples at
regular intervals, and a sample takes the color of the supersegment containing
it with opacity derived from the distance to the previous sample. Empty cells
get no samples at all. The low-res image is upsampled bilinearly, and a PI
controller adjusts d_i to hold a target frame rate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._geom import clip_aabb, clip_frustum, ndc_of, world_of
from .camera import Camera
from .image import Image
from .raycast import _find_first
from .vdi import AccelGrid, Vdi


@dataclass(frozen=True)
class PreviewParams:
    d_i: float = 1.0                 # image-space resolution factor
    d_r: float = 1.0                 # along-ray sampling rate
    target_fps: float = 30.0
    display: tuple[int, int] = (256, 256)

    def __post_init__(self):
        if not (0.0 < self.d_i <= 1.0):
            raise ValueError("d_i must be in (0, 1]")
        if not (0.0 < self.d_r <= 1.0):
            raise ValueError("d_r must be in (0, 1]")


def samples_in_cell(d_r: float, isect_len: float, count: int) -> int:
    """Sample budget for one grid cell: round-half-up(d_r * length * count)."""
    if d_r < 0 or isect_len < 0 or count < 0:
        raise ValueError("inputs must be non-negative")
    return int(math.floor(d_r * isect_len * count + 0.5))


@njit(cache=True)
def _preview_kernel(segs, counts, vdi_w, vdi_h,
                    gen_pv, gen_inv_pv,
                    ax0, ay0, az0, ax1, ay1, az1,
                    new_inv_pv, npx, npy, npz, out_w, out_h,
                    gcounts, gx, gy, gz, near, far, proj_a, proj_b,
                    d_r, early_term, bg, img, cell_samples):
    total = 0
    nb_cap = gx + gy + gz + 2
    brks = np.empty(nb_cap, dtype=np.float64)
    for row in range(out_h):
        for col in range(out_w):
            acc_r = acc_g = acc_b = acc_a = 0.0
            ndcx = 2.0 * (col + 0.5) / out_w - 1.0
            ndcy = 2.0 * (row + 0.5) / out_h - 1.0
            wx, wy, wz = world_of(new_inv_pv, ndcx, ndcy, -1.0)
            dx = wx - npx
            dy = wy - npy
            dz = wz - npz
            norm = math.sqrt(dx * dx + dy * dy + dz * dz)
            dx /= norm
            dy /= norm
            dz /= norm

            ok = False
            t0 = 0.0
            t1 = 0.0
            hit, ta, tb = clip_aabb(npx, npy, npz, dx, dy, dz,
                                    ax0, ay0, az0, ax1, ay1, az1)
            if hit:
                fhit, fa, fb = clip_frustum(gen_pv, npx, npy, npz, dx, dy, dz)
                if fhit:
                    t0 = max(max(ta, fa), 0.0)
                    t1 = min(tb, fb)
                    if t1 > t0:
                        ok = True
            if ok:
                a0x, a0y, a0z = ndc_of(gen_pv, npx + t0 * dx, npy + t0 * dy,
                                       npz + t0 * dz)
                a1x, a1y, a1z = ndc_of(gen_pv, npx + t1 * dx, npy + t1 * dy,
                                       npz + t1 * dz)
                cdx = a1x - a0x
                cdy = a1y - a0y
                cdz = a1z - a0z

                # chord breakpoints at grid-cell boundaries, in chord parameter s
                nb = 0
                brks[nb] = 0.0
                nb += 1
                brks[nb] = 1.0
                nb += 1
                if abs(cdx) > 1e-14:
                    for i in range(1, gx):
                        s = (-1.0 + 2.0 * i / gx - a0x) / cdx
                        if 0.0 < s < 1.0:
                            brks[nb] = s
                            nb += 1
                if abs(cdy) > 1e-14:
                    for i in range(1, gy):
                        s = (-1.0 + 2.0 * i / gy - a0y) / cdy
                        if 0.0 < s < 1.0:
                            brks[nb] = s
                            nb += 1
                if abs(cdz) > 1e-14:
                    for i in range(1, gz):
                        dep = near + (far - near) * i / gz
                        zb = proj_a - proj_b / dep
                        s = (zb - a0z) / cdz
                        if 0.0 < s < 1.0:
                            brks[nb] = s
                            nb += 1
                bs = np.sort(brks[:nb])

                # previous-sample position starts at the chord entry point
                prev_x, prev_y, prev_z = world_of(gen_inv_pv, a0x, a0y, a0z)
                p = -1
                done = False
                for bi in range(len(bs) - 1):
                    s_a = bs[bi]
                    s_b = bs[bi + 1]
                    if s_b - s_a < 1e-15:
                        continue
                    sm = 0.5 * (s_a + s_b)
                    mx = a0x + sm * cdx
                    my = a0y + sm * cdy
                    mz = a0z + sm * cdz
                    cgx = min(max(int(math.floor((mx + 1.0) * gx / 2.0)), 0), gx - 1)
                    cgy = min(max(int(math.floor((my + 1.0) * gy / 2.0)), 0), gy - 1)
                    dep = proj_b / (proj_a - mz)
                    cgz = min(max(int(math.floor((dep - near) / (far - near) * gz)),
                                  0), gz - 1)
                    cnt = gcounts[cgz, cgy, cgx]
                    if cnt == 0:
                        continue
                    w0x, w0y, w0z = world_of(gen_inv_pv, a0x + s_a * cdx,
                                             a0y + s_a * cdy, a0z + s_a * cdz)
                    w1x, w1y, w1z = world_of(gen_inv_pv, a0x + s_b * cdx,
                                             a0y + s_b * cdy, a0z + s_b * cdz)
                    seg_len = math.sqrt((w1x - w0x) ** 2 + (w1y - w0y) ** 2
                                        + (w1z - w0z) ** 2)
                    n = int(math.floor(d_r * seg_len * cnt + 0.5))
                    if n <= 0:
                        continue
                    cell_samples[cgz, cgy, cgx] += n
                    total += n
                    for i in range(n):
                        sf = s_a + (i + 0.5) / n * (s_b - s_a)
                        sx = a0x + sf * cdx
                        sy = a0y + sf * cdy
                        sz = a0z + sf * cdz
                        swx, swy, swz = world_of(gen_inv_pv, sx, sy, sz)
                        dist = math.sqrt((swx - prev_x) ** 2 + (swy - prev_y) ** 2
                                         + (swz - prev_z) ** 2)
                        prev_x, prev_y, prev_z = swx, swy, swz
                        lx = min(max(int(math.floor((sx + 1.0) * vdi_w / 2.0)),
                                     0), vdi_w - 1)
                        ly = min(max(int(math.floor((sy + 1.0) * vdi_h / 2.0)),
                                     0), vdi_h - 1)
                        lc = counts[ly, lx]
                        if lc == 0:
                            continue
                        fronts = segs[ly, lx, :, 0]
                        backs = segs[ly, lx, :, 1]
                        j, seed = _find_first(fronts, backs, lc, sz, sz, p)
                        p = seed
                        if j < 0:
                            continue
                        alpha = segs[ly, lx, j, 5]
                        if alpha <= 0.0:
                            continue
                        xc = -1.0 + 2.0 * (lx + 0.5) / vdi_w
                        yc = -1.0 + 2.0 * (ly + 0.5) / vdi_h
                        wfx, wfy, wfz = world_of(gen_inv_pv, xc, yc, fronts[j])
                        wbx, wby, wbz = world_of(gen_inv_pv, xc, yc, backs[j])
                        thick = math.sqrt((wbx - wfx) ** 2 + (wby - wfy) ** 2
                                          + (wbz - wfz) ** 2)
                        if thick <= 0.0:
                            continue
                        a_t = 1.0 - (1.0 - alpha) ** (dist / thick)
                        scale = a_t / alpha
                        w = 1.0 - acc_a
                        acc_r += w * segs[ly, lx, j, 2] * scale
                        acc_g += w * segs[ly, lx, j, 3] * scale
                        acc_b += w * segs[ly, lx, j, 4] * scale
                        acc_a += w * a_t
                        if acc_a >= early_term:
                            done = True
                            break
                    if done:
                        break

            w = 1.0 - acc_a
            img[row, col, 0] = acc_r + w * bg[0] * bg[3]
            img[row, col, 1] = acc_g + w * bg[1] * bg[3]
            img[row, col, 2] = acc_b + w * bg[2] * bg[3]
            img[row, col, 3] = acc_a + w * bg[3]
    return total


def bilinear_upsample(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of an (h, w, c) array; identity when sizes match."""
    h, w = arr.shape[:2]
    if (w, h) == (out_w, out_h):
        return arr
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    top = arr[y0[:, None], x0[None, :]] * (1 - fx) + arr[y0[:, None], x1[None, :]] * fx
    bot = arr[y1[:, None], x0[None, :]] * (1 - fx) + arr[y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bot * fy


@dataclass(frozen=True)
class PreviewStats:
    total_samples: int
    cell_samples: np.ndarray  # (gz, gy, gx) int64
    frame_ms: float


def render_preview(vdi: Vdi, grid: AccelGrid, cam_new: Camera,
                   params: PreviewParams,
                   background=(0.0, 0.0, 0.0, 1.0),
                   with_stats: bool = False):
    """Point-sampled preview; returns the upsampled Image (and PreviewStats)."""
    disp_w, disp_h = params.display
    low_w = max(1, round(disp_w * params.d_i))
    low_h = max(1, round(disp_h * params.d_i))
    cam_low = Camera(position=cam_new.position, orientation=cam_new.orientation,
                     fov_y=cam_new.fov_y, near=cam_new.near, far=cam_new.far,
                     viewport=(low_w, low_h))
    gen_cam = vdi.gen_camera
    gx, gy, gz = grid.dims
    n, f = gen_cam.near, gen_cam.far
    proj_a = (f + n) / (f - n)
    proj_b = 2.0 * f * n / (f - n)
    img = np.zeros((low_h, low_w, 4), dtype=np.float64)
    cell_samples = np.zeros((gz, gy, gx), dtype=np.int64)
    bg = np.asarray(background, dtype=np.float64)
    t_start = time.perf_counter()
    total = _preview_kernel(vdi.segs, vdi.counts, vdi.width, vdi.height,
                            gen_cam.proj_view(), gen_cam.inv_proj_view(),
                            *vdi.volume_aabb[0], *vdi.volume_aabb[1],
                            cam_low.inv_proj_view(),
                            *np.asarray(cam_low.position, dtype=np.float64),
                            low_w, low_h,
                            grid.counts, gx, gy, gz, grid.near, grid.far,
                            proj_a, proj_b,
                            params.d_r, 0.999, bg, img, cell_samples)
    up = bilinear_upsample(img, disp_w, disp_h)
    ms = (time.perf_counter() - t_start) * 1000.0
    image = Image.from_array(up)
    if with_stats:
        return image, PreviewStats(total_samples=int(total),
                                   cell_samples=cell_samples, frame_ms=ms)
    return image


@dataclass
class PiController:
    """Holds d_i near a target frame rate; clamped output, anti-windup integral."""

    kp: float = 6e-3
    ki: float = 9e-4
    d_i: float = 1.0
    integral: float = 0.0
    bounds: tuple[float, float] = (0.1, 1.0)

    def update(self, measured_frame_ms: float, target_fps: float) -> float:
        return pi_update(self, measured_frame_ms, target_fps)


def pi_update(ctrl: PiController, measured_frame_ms: float,
              target_fps: float) -> float:
    """One controller step; mutates ctrl and returns the new d_i."""
    if measured_frame_ms <= 0:
        raise ValueError("measured_frame_ms must be > 0")
    lo, hi = ctrl.bounds
    error = 1000.0 / target_fps - measured_frame_ms
    ctrl.integral += error
    span = (hi - lo) / ctrl.ki if ctrl.ki > 0 else math.inf
    ctrl.integral = min(max(ctrl.integral, -span), span)
    d_i = ctrl.d_i + ctrl.kp * error + ctrl.ki * ctrl.integral
    ctrl.d_i = min(max(d_i, lo), hi)
    return ctrl.d_i
