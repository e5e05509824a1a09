"""Full-quality novel-view rendering of a VDI by raycasting in the NDC space
of the generation camera.

Per pixel: the world ray is clipped to the volume box and the generation
frustum, projected to an NDC chord, and stepped through the list grid with the
Amanatides-Woo DDA. Within each list the first intersected supersegment is
found with a seeded search that exploits spatial smoothness; neighbors follow
by adjacency. Stored opacity is corrected for the actual intersection length
(alpha' = 1 - (1-alpha)^l, l normalized by the supersegment's generation-ray
thickness) and composited front to back with early termination.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from ._geom import clip_aabb, clip_frustum, ndc_of, world_of
from .camera import Camera, Ray
from .image import Image
from .vdi import AccelGrid, Vdi


@dataclass(frozen=True)
class RenderOptions:
    use_ess: bool = True
    early_term_alpha: float = 0.999
    background: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        if not (0.0 < self.early_term_alpha <= 1.0):
            raise ValueError("early_term_alpha must be in (0, 1]")


@dataclass(frozen=True)
class RenderStats:
    lists_visited: int
    supersegments_intersected: int
    frame_ms: float


def opacity_correct(alpha: float, l: float) -> float:
    """Adjust stored opacity to intersection length l (generation thickness = 1)."""
    return 1.0 - (1.0 - alpha) ** l


@njit(cache=True)
def _bins(backs, d, start, stop):
    """Smallest j in [start, stop] with backs[j] >= d (stop if none)."""
    lo = start
    hi = stop
    while lo < hi:
        mid = (lo + hi) // 2
        if backs[mid] >= d:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _bins_front(fronts, d, start, stop):
    """Largest j in [start, stop] with fronts[j] <= d (start if none)."""
    lo = start
    hi = stop
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fronts[mid] <= d:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True)
def _find_first(fronts, backs, count, d_entry, d_exit, p):
    """First supersegment intersected by the chord window; returns (index, seed).

    index is -1 when the ray passes between supersegments; seed is the
    closest index, reusable as the next list's p.
    """
    if count == 0:
        return -1, p
    if d_entry <= d_exit:
        index = -1
        bs_start = -1
        bs_end = -1
        if p < 0:
            bs_start = 0
            bs_end = count - 1
        else:
            b1 = backs[p] if p < count else math.inf
            b0 = backs[p - 1] if 0 <= p - 1 < count else -math.inf
            interval = (1 if b1 >= d_entry else 0) + (1 if b0 >= d_entry else 0)
            if interval == 0:
                bs_start = p + 1
                bs_end = count - 1
            elif interval == 2:
                bs_start = 0
                bs_end = p - 1
            else:
                if p < count:
                    index = p
                else:
                    bs_start = 0
                    bs_end = count - 1
        if bs_end != -1:
            if bs_start > bs_end:
                # empty pruned range: insertion point is just outside it
                index = min(max(bs_start, 0), count - 1)
            else:
                index = _bins(backs, d_entry, bs_start, min(bs_end, count - 1))
        if backs[index] < d_entry:
            return -1, index
        if fronts[index] > d_exit:
            return -1, index
        return index, index
    else:
        # reverse traversal: largest index with front <= d_entry
        if p < 0:
            index = _bins_front(fronts, d_entry, 0, count - 1)
        else:
            f1 = fronts[p] if p < count else math.inf
            f0 = fronts[p + 1] if 0 <= p + 1 < count else math.inf
            if p < count and f1 <= d_entry and f0 > d_entry:
                index = p
            elif f1 > d_entry:
                index = _bins_front(fronts, d_entry, 0, max(p - 1, 0))
            else:
                index = _bins_front(fronts, d_entry, min(p + 1, count - 1), count - 1)
        if index > count - 1:
            index = count - 1
        if fronts[index] > d_entry:
            return -1, index
        if backs[index] < d_exit:
            return -1, index
        return index, index


def find_first_supersegment(seg_list: np.ndarray, d_entry: float, d_exit: float,
                            p: int = -1):
    """Python-facing wrapper over the seeded search.

    seg_list: (n, 6) array of valid supersegments (front, back, r, g, b, a).
    Returns (index or None, seed_index).
    """
    seg_list = np.asarray(seg_list, dtype=np.float32).reshape(-1, 6)
    fronts = np.ascontiguousarray(seg_list[:, 0])
    backs = np.ascontiguousarray(seg_list[:, 1])
    idx, seed = _find_first(fronts, backs, len(seg_list),
                            float(d_entry), float(d_exit), int(p))
    return (None if idx < 0 else int(idx)), int(seed)


@njit(cache=True)
def _dda_cells(a0, a1, width, height, out_cells, out_z):
    """DDA over the NDC list grid; fills (cx, cy) and (d_entry, d_exit) rows.

    Returns the number of visited cells. x steps before y on exact corner ties.
    """
    x0, y0, z0 = a0[0], a0[1], a0[2]
    dx = a1[0] - x0
    dy = a1[1] - y0
    dz = a1[2] - z0
    cx = int(math.floor((x0 + 1.0) * width / 2.0))
    cy = int(math.floor((y0 + 1.0) * height / 2.0))
    if cx < 0:
        cx = 0
    elif cx > width - 1:
        cx = width - 1
    if cy < 0:
        cy = 0
    elif cy > height - 1:
        cy = height - 1
    step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
    if step_x != 0:
        bx = -1.0 + 2.0 * (cx + (1 if step_x > 0 else 0)) / width
        t_max_x = (bx - x0) / dx
        t_delta_x = (2.0 / width) / abs(dx)
    else:
        t_max_x = math.inf
        t_delta_x = math.inf
    if step_y != 0:
        by = -1.0 + 2.0 * (cy + (1 if step_y > 0 else 0)) / height
        t_max_y = (by - y0) / dy
        t_delta_y = (2.0 / height) / abs(dy)
    else:
        t_max_y = math.inf
        t_delta_y = math.inf

    n = 0
    s_cur = 0.0
    max_iter = width + height + 4
    for _ in range(max_iter):
        s_exit = min(min(t_max_x, t_max_y), 1.0)
        if s_exit < s_cur:
            s_exit = s_cur
        out_cells[n, 0] = cx
        out_cells[n, 1] = cy
        out_z[n, 0] = z0 + s_cur * dz
        out_z[n, 1] = z0 + s_exit * dz
        out_z[n, 2] = s_cur
        out_z[n, 3] = s_exit
        n += 1
        if s_exit >= 1.0:
            break
        if t_max_x <= t_max_y:
            cx += step_x
            s_cur = t_max_x
            t_max_x += t_delta_x
        else:
            cy += step_y
            s_cur = t_max_y
            t_max_y += t_delta_y
        if cx < 0 or cx >= width or cy < 0 or cy >= height:
            break
    return n


def dda_traverse(a0, a1, width: int, height: int):
    """Visited list cells of an NDC chord with per-cell entry/exit NDC z."""
    a0 = np.asarray(a0, dtype=np.float64)
    a1 = np.asarray(a1, dtype=np.float64)
    cap = width + height + 4
    cells = np.zeros((cap, 2), dtype=np.int64)
    zs = np.zeros((cap, 4), dtype=np.float64)
    n = _dda_cells(a0, a1, width, height, cells, zs)
    return [((int(cells[i, 0]), int(cells[i, 1])), float(zs[i, 0]), float(zs[i, 1]))
            for i in range(n)]


def project_ray_to_ndc(ray: Ray, gen_cam: Camera, volume_aabb):
    """Clip a world ray to volume box + generation frustum; NDC chord or None."""
    aabb = np.asarray(volume_aabb, dtype=np.float64)
    hit, ta, tb = clip_aabb(*ray.origin, *ray.dir, *aabb[0], *aabb[1])
    if not hit:
        return None
    pv = gen_cam.proj_view()
    fhit, fa, fb = clip_frustum(pv, *ray.origin, *ray.dir)
    if not fhit:
        return None
    t0 = max(ta, fa, 0.0)
    t1 = min(tb, fb)
    if t1 <= t0:
        return None
    p0 = ray.origin + t0 * ray.dir
    p1 = ray.origin + t1 * ray.dir
    a0 = np.array(ndc_of(pv, *p0))
    a1 = np.array(ndc_of(pv, *p1))
    return a0, a1


@njit(cache=True, inline="always")
def _grid_cell_range(x_a, y_a, x_b, y_b, d_a, d_b, gx, gy, gz, near, far):
    cgx0 = int(math.floor((min(x_a, x_b) + 1.0) * gx / 2.0))
    cgx1 = int(math.floor((max(x_a, x_b) + 1.0) * gx / 2.0))
    cgy0 = int(math.floor((min(y_a, y_b) + 1.0) * gy / 2.0))
    cgy1 = int(math.floor((max(y_a, y_b) + 1.0) * gy / 2.0))
    cz0 = int(math.floor((min(d_a, d_b) - near) / (far - near) * gz))
    cz1 = int(math.floor((max(d_a, d_b) - near) / (far - near) * gz))
    cgx0 = min(max(cgx0, 0), gx - 1)
    cgx1 = min(max(cgx1, 0), gx - 1)
    cgy0 = min(max(cgy0, 0), gy - 1)
    cgy1 = min(max(cgy1, 0), gy - 1)
    cz0 = min(max(cz0, 0), gz - 1)
    cz1 = min(max(cz1, 0), gz - 1)
    return cgx0, cgx1, cgy0, cgy1, cz0, cz1


@njit(cache=True, parallel=True)
def _render_kernel(segs, counts, vdi_w, vdi_h,
                   gen_pv, gen_inv_pv,
                   ax0, ay0, az0, ax1, ay1, az1,
                   new_inv_pv, npx, npy, npz, out_w, out_h,
                   use_ess, gcounts, gx, gy, gz, near, far, proj_a, proj_b,
                   early_term, bg, img, lists_vis, segs_int):
    n_sg = segs.shape[2]
    for idx in prange(out_h * out_w):
        row = idx // out_w
        col = idx % out_w
        acc_r = acc_g = acc_b = acc_a = 0.0
        nvis = 0
        nint = 0

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

        hit, ta, tb = clip_aabb(npx, npy, npz, dx, dy, dz,
                                ax0, ay0, az0, ax1, ay1, az1)
        ok = False
        t0 = 0.0
        t1 = 0.0
        if hit:
            fhit, fa, fb = clip_frustum(gen_pv, npx, npy, npz, dx, dy, dz)
            if fhit:
                t0 = max(max(ta, fa), 0.0)
                t1 = min(tb, fb)
                if t1 > t0:
                    ok = True
        if ok:
            a0x, a0y, a0z = ndc_of(gen_pv, npx + t0 * dx, npy + t0 * dy, npz + t0 * dz)
            a1x, a1y, a1z = ndc_of(gen_pv, npx + t1 * dx, npy + t1 * dy, npz + t1 * dz)
            cdx = a1x - a0x
            cdy = a1y - a0y
            cdz = a1z - a0z

            cx = int(math.floor((a0x + 1.0) * vdi_w / 2.0))
            cy = int(math.floor((a0y + 1.0) * vdi_h / 2.0))
            cx = min(max(cx, 0), vdi_w - 1)
            cy = min(max(cy, 0), vdi_h - 1)
            step_x = 1 if cdx > 0 else (-1 if cdx < 0 else 0)
            step_y = 1 if cdy > 0 else (-1 if cdy < 0 else 0)
            if step_x != 0:
                bx = -1.0 + 2.0 * (cx + (1 if step_x > 0 else 0)) / vdi_w
                t_max_x = (bx - a0x) / cdx
                t_delta_x = (2.0 / vdi_w) / abs(cdx)
            else:
                t_max_x = math.inf
                t_delta_x = math.inf
            if step_y != 0:
                by = -1.0 + 2.0 * (cy + (1 if step_y > 0 else 0)) / vdi_h
                t_max_y = (by - a0y) / cdy
                t_delta_y = (2.0 / vdi_h) / abs(cdy)
            else:
                t_max_y = math.inf
                t_delta_y = math.inf

            p = -1
            s_cur = 0.0
            done = False
            for _ in range(vdi_w + vdi_h + 4):
                s_exit = min(min(t_max_x, t_max_y), 1.0)
                if s_exit < s_cur:
                    s_exit = s_cur
                d_entry = a0z + s_cur * cdz
                d_exit = a0z + s_exit * cdz
                nvis += 1

                count = counts[cy, cx]
                search = count > 0
                if search and use_ess:
                    x_a = a0x + s_cur * cdx
                    y_a = a0y + s_cur * cdy
                    x_b = a0x + s_exit * cdx
                    y_b = a0y + s_exit * cdy
                    dep_a = proj_b / (proj_a - d_entry)
                    dep_b = proj_b / (proj_a - d_exit)
                    cgx0, cgx1, cgy0, cgy1, cz0, cz1 = _grid_cell_range(
                        x_a, y_a, x_b, y_b, dep_a, dep_b, gx, gy, gz, near, far)
                    empty = True
                    for cz in range(cz0, cz1 + 1):
                        for cgy in range(cgy0, cgy1 + 1):
                            for cgx in range(cgx0, cgx1 + 1):
                                if gcounts[cz, cgy, cgx] > 0:
                                    empty = False
                        if not empty:
                            break
                    if empty:
                        search = False

                if search:
                    fronts = segs[cy, cx, :, 0]
                    backs = segs[cy, cx, :, 1]
                    j, seed = _find_first(fronts, backs, count, d_entry, d_exit, p)
                    p = seed
                    if j >= 0:
                        fwd = d_entry <= d_exit
                        zlo = min(d_entry, d_exit)
                        zhi = max(d_entry, d_exit)
                        # list-center NDC column for generation thickness
                        xc = -1.0 + 2.0 * (cx + 0.5) / vdi_w
                        yc = -1.0 + 2.0 * (cy + 0.5) / vdi_h
                        k = j
                        while 0 <= k < count:
                            fk = fronts[k]
                            bk = backs[k]
                            ilo = max(fk, zlo)
                            ihi = min(bk, zhi)
                            if ilo > ihi:
                                break
                            if abs(cdz) < 1e-12:
                                s_a = s_cur
                                s_b = s_exit
                            else:
                                s_a = (ilo - a0z) / cdz
                                s_b = (ihi - a0z) / cdz
                                if s_a > s_b:
                                    s_a, s_b = s_b, s_a
                                if s_a < s_cur:
                                    s_a = s_cur
                                if s_b > s_exit:
                                    s_b = s_exit
                            w0x, w0y, w0z = world_of(
                                gen_inv_pv, a0x + s_a * cdx, a0y + s_a * cdy,
                                a0z + s_a * cdz)
                            w1x, w1y, w1z = world_of(
                                gen_inv_pv, a0x + s_b * cdx, a0y + s_b * cdy,
                                a0z + s_b * cdz)
                            l = math.sqrt((w1x - w0x) ** 2 + (w1y - w0y) ** 2
                                          + (w1z - w0z) ** 2)
                            wfx, wfy, wfz = world_of(gen_inv_pv, xc, yc, fk)
                            wbx, wby, wbz = world_of(gen_inv_pv, xc, yc, bk)
                            thick = math.sqrt((wbx - wfx) ** 2 + (wby - wfy) ** 2
                                              + (wbz - wfz) ** 2)
                            alpha = segs[cy, cx, k, 5]
                            if alpha > 0.0 and thick > 0.0:
                                a_t = 1.0 - (1.0 - alpha) ** (l / thick)
                                scale = a_t / alpha
                                w = 1.0 - acc_a
                                acc_r += w * segs[cy, cx, k, 2] * scale
                                acc_g += w * segs[cy, cx, k, 3] * scale
                                acc_b += w * segs[cy, cx, k, 4] * scale
                                acc_a += w * a_t
                            nint += 1
                            p = k
                            if acc_a >= early_term:
                                done = True
                                break
                            k += 1 if fwd else -1

                if done or acc_a >= early_term:
                    break
                if s_exit >= 1.0:
                    break
                if t_max_x <= t_max_y:
                    cx += step_x
                    s_cur = t_max_x
                    t_max_x += t_delta_x
                else:
                    cy += step_y
                    s_cur = t_max_y
                    t_max_y += t_delta_y
                if cx < 0 or cx >= vdi_w or cy < 0 or cy >= vdi_h:
                    break

        # composite over background (bg is straight rgba)
        w = 1.0 - acc_a
        img[row, col, 0] = acc_r + w * bg[0] * bg[3]
        img[row, col, 1] = acc_g + w * bg[1] * bg[3]
        img[row, col, 2] = acc_b + w * bg[2] * bg[3]
        img[row, col, 3] = acc_a + w * bg[3]
        lists_vis[row, col] = nvis
        segs_int[row, col] = nint


def render_vdi(vdi: Vdi, grid: AccelGrid, cam_new: Camera,
               opts: RenderOptions | None = None,
               with_stats: bool = False):
    """Render a VDI from a novel viewpoint; returns Image (and RenderStats)."""
    opts = opts or RenderOptions()
    out_w, out_h = cam_new.viewport
    img = np.zeros((out_h, out_w, 4), dtype=np.float64)
    lists_vis = np.zeros((out_h, out_w), dtype=np.int64)
    segs_int = np.zeros((out_h, out_w), dtype=np.int64)
    gen_cam = vdi.gen_camera
    gx, gy, gz = grid.dims
    n, f = gen_cam.near, gen_cam.far
    proj_a = (f + n) / (f - n)
    proj_b = 2.0 * f * n / (f - n)
    bg = np.asarray(opts.background, dtype=np.float64)
    t_start = time.perf_counter()
    _render_kernel(vdi.segs, vdi.counts, vdi.width, vdi.height,
                   gen_cam.proj_view(), gen_cam.inv_proj_view(),
                   *vdi.volume_aabb[0], *vdi.volume_aabb[1],
                   cam_new.inv_proj_view(),
                   *np.asarray(cam_new.position, dtype=np.float64),
                   out_w, out_h,
                   opts.use_ess, grid.counts, gx, gy, gz,
                   grid.near, grid.far, proj_a, proj_b,
                   opts.early_term_alpha, bg, img, lists_vis, segs_int)
    ms = (time.perf_counter() - t_start) * 1000.0
    image = Image.from_array(img)
    if with_stats:
        stats = RenderStats(lists_visited=int(lists_vis.sum()),
                            supersegments_intersected=int(segs_int.sum()),
                            frame_ms=ms)
        return image, stats
    return image


def composite_lists(vdi: Vdi, opts: RenderOptions | None = None) -> Image:
    """Direct front-to-back compositing of each list's stored supersegments.

    The identity-view oracle: no traversal, no search, no length correction.
    """
    opts = opts or RenderOptions()
    bg = np.asarray(opts.background, dtype=np.float64)
    img = np.zeros((vdi.height, vdi.width, 4), dtype=np.float64)
    segs = vdi.segs.astype(np.float64)
    for ly in range(vdi.height):
        for lx in range(vdi.width):
            acc = np.zeros(4)
            for k in range(vdi.counts[ly, lx]):
                s = segs[ly, lx, k]
                w = 1.0 - acc[3]
                acc[0] += w * s[2]
                acc[1] += w * s[3]
                acc[2] += w * s[4]
                acc[3] += w * s[5]
                if acc[3] >= opts.early_term_alpha:
                    break
            w = 1.0 - acc[3]
            img[ly, lx, :3] = acc[:3] + w * bg[:3] * bg[3]
            img[ly, lx, 3] = acc[3] + w * bg[3]
    return Image.from_array(img)
