"""VDI generation: per-ray supersegment accumulation with an adaptive
homogeneity threshold gamma found by bisection.

A sample is merged into the open supersegment while the L2 distance between
the segment's mean premultiplied color and the sample's premultiplied,
length-adjusted color stays below gamma; otherwise a new segment starts.
gamma is searched per ray so that each list ends up with close to (but never
more than) its budget of n_sg supersegments.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from ._geom import clip_aabb, clip_frustum, ndc_of, world_of
from .camera import Camera, Ray
from .vdi import AccelGrid, Vdi, default_grid_dims
from .volume import TransferFunction, Volume, _sample_classified

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class GenParams:
    n_sg: int = 12
    delta: int | None = None        # bisection slack; default floor(0.15 n_sg), >= 1
    epsilon: float = 1e-6           # bisection bracket-width cutoff
    gamma_init: float = 1e-5        # first-iteration gamma
    step: float | None = None       # world-unit sampling step; default half min spacing
    ref_step: float | None = None   # opacity reference length; default == step
    alpha_early: float = 0.999      # opaque cutoff used by renderers, not generation

    def resolve(self, vol: Volume) -> tuple[int, float, float]:
        step = self.step if self.step is not None else 0.5 * min(vol.spacing)
        lref = self.ref_step if self.ref_step is not None else step
        if self.delta is None:
            delta = max(1, int(0.15 * self.n_sg))
        else:
            delta = self.delta
        delta = min(delta, self.n_sg - 1)
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must be in (0, 1)")
        if self.n_sg < 1:
            raise ValueError("n_sg must be >= 1")
        return delta, step, lref


@njit(cache=True, inline="always")
def _emit(out_seg, tseg, count, pv, ox, oy, oz, dx, dy, dz,
          fr_t, bk_t, acc_r, acc_g, acc_b, acc_a):
    _, _, zf = ndc_of(pv, ox + fr_t * dx, oy + fr_t * dy, oz + fr_t * dz)
    _, _, zb = ndc_of(pv, ox + bk_t * dx, oy + bk_t * dy, oz + bk_t * dz)
    f = np.float32(zf)
    b = np.float32(zb)
    if f < np.float32(-1.0):
        f = np.float32(-1.0)
    if count > 0 and f < out_seg[count - 1, 1]:
        f = out_seg[count - 1, 1]
    if b > np.float32(1.0):
        b = np.float32(1.0)
    if b <= f:
        b = np.nextafter(f, np.float32(2.0))
    a32 = np.float32(acc_a)
    r32 = np.float32(acc_r)
    g32 = np.float32(acc_g)
    b32 = np.float32(acc_b)
    if r32 > a32:
        r32 = a32
    if g32 > a32:
        g32 = a32
    if b32 > a32:
        b32 = a32
    out_seg[count, 0] = f
    out_seg[count, 1] = b
    out_seg[count, 2] = r32
    out_seg[count, 3] = g32
    out_seg[count, 4] = b32
    out_seg[count, 5] = a32
    tseg[count, 0] = fr_t
    tseg[count, 1] = bk_t
    return count + 1


@njit(cache=True)
def _gen_list_pass(vol, lut, pv, ox, oy, oz, dx, dy, dz,
                   ax0, ay0, az0, ax1, ay1, az1,
                   t0, t1, step, lref, gamma, n_sg, capped, out_seg, tseg):
    """One front-to-back pass; returns the supersegment count.

    In counting mode (capped=False) the pass aborts and returns n_sg+1 the
    moment the budget would be exceeded. In capped mode overflow is merged
    into the last supersegment.
    """
    count = 0
    active = False
    fr_t = 0.0
    bk_t = 0.0
    mr = mg = mb = 0.0
    nsamp = 0
    acc_r = acc_g = acc_b = acc_a = 0.0
    ex = ax1 - ax0
    ey = ay1 - ay0
    ez = az1 - az0

    nsteps = int(math.ceil((t1 - t0) / step))
    for k in range(nsteps):
        ta = t0 + k * step
        tb = ta + step
        if tb > t1:
            tb = t1
        if tb <= ta:
            break
        tm = 0.5 * (ta + tb)
        qx = (ox + tm * dx - ax0) / ex
        qy = (oy + tm * dy - ay0) / ey
        qz = (oz + tm * dz - az0) / ez
        if qx < 0.0:
            qx = 0.0
        elif qx > 1.0:
            qx = 1.0
        if qy < 0.0:
            qy = 0.0
        elif qy > 1.0:
            qy = 1.0
        if qz < 0.0:
            qz = 0.0
        elif qz > 1.0:
            qz = 1.0
        rgba = _sample_classified(vol, lut, qx, qy, qz)
        a = rgba[3]
        if a <= 0.0:
            # fully transparent: never part of a supersegment, closes the open one
            if active:
                count = _emit(out_seg, tseg, count, pv, ox, oy, oz, dx, dy, dz,
                              fr_t, bk_t, acc_r, acc_g, acc_b, acc_a)
                active = False
            continue
        a_adj = 1.0 - (1.0 - a) ** ((tb - ta) / lref)
        sr = rgba[0] * a_adj
        sg = rgba[1] * a_adj
        sb = rgba[2] * a_adj
        if not active:
            if count >= n_sg:
                if not capped:
                    return n_sg + 1
                # reopen the last supersegment and smear into it
                count -= 1
                fr_t = tseg[count, 0]
                acc_r = out_seg[count, 2]
                acc_g = out_seg[count, 3]
                acc_b = out_seg[count, 4]
                acc_a = out_seg[count, 5]
                acc_r += (1.0 - acc_a) * sr
                acc_g += (1.0 - acc_a) * sg
                acc_b += (1.0 - acc_a) * sb
                acc_a += (1.0 - acc_a) * a_adj
                bk_t = tb
                mr, mg, mb = sr, sg, sb
                nsamp = 1
                active = True
            else:
                active = True
                fr_t = ta
                bk_t = tb
                mr, mg, mb = sr, sg, sb
                nsamp = 1
                acc_r, acc_g, acc_b, acc_a = sr, sg, sb, a_adj
        else:
            dr = mr - sr
            dg = mg - sg
            db = mb - sb
            dist = math.sqrt(dr * dr + dg * dg + db * db)
            if dist >= gamma:
                # homogeneity violated: close the segment, start a new one
                if count + 1 >= n_sg:
                    if not capped:
                        return n_sg + 1
                    # keep merging into the open last segment
                    acc_r += (1.0 - acc_a) * sr
                    acc_g += (1.0 - acc_a) * sg
                    acc_b += (1.0 - acc_a) * sb
                    acc_a += (1.0 - acc_a) * a_adj
                    bk_t = tb
                    nsamp += 1
                    inv = 1.0 / nsamp
                    mr += (sr - mr) * inv
                    mg += (sg - mg) * inv
                    mb += (sb - mb) * inv
                else:
                    count = _emit(out_seg, tseg, count, pv, ox, oy, oz, dx, dy, dz,
                                  fr_t, bk_t, acc_r, acc_g, acc_b, acc_a)
                    fr_t = ta
                    bk_t = tb
                    mr, mg, mb = sr, sg, sb
                    nsamp = 1
                    acc_r, acc_g, acc_b, acc_a = sr, sg, sb, a_adj
            else:
                acc_r += (1.0 - acc_a) * sr
                acc_g += (1.0 - acc_a) * sg
                acc_b += (1.0 - acc_a) * sb
                acc_a += (1.0 - acc_a) * a_adj
                bk_t = tb
                nsamp += 1
                inv = 1.0 / nsamp
                mr += (sr - mr) * inv
                mg += (sg - mg) * inv
                mb += (sb - mb) * inv
    if active:
        count = _emit(out_seg, tseg, count, pv, ox, oy, oz, dx, dy, dz,
                      fr_t, bk_t, acc_r, acc_g, acc_b, acc_a)
    return count


@njit(cache=True)
def _find_gamma_list(vol, lut, pv, ox, oy, oz, dx, dy, dz,
                     ax0, ay0, az0, ax1, ay1, az1,
                     t0, t1, step, lref, n_sg, delta, eps, gamma_init,
                     out_seg, tseg, high_seg):
    """Bisection for gamma; returns (gamma, count, volume_passes).

    The bracket-width check runs before each measurement pass so the
    worst case stays at 22 volume passes; the high endpoint's segments are
    cached so the epsilon-exit usually costs no extra pass.
    """
    low = 0.0
    high = SQRT3
    gamma = gamma_init
    first = True
    last_n = 1
    high_n = -1
    passes = 0
    while True:
        if abs(high - low) < eps:
            if last_n == 0:
                g = low
            else:
                g = high
                if high_n >= 0:
                    for i in range(high_n):
                        for c in range(6):
                            out_seg[i, c] = high_seg[i, c]
                    return g, high_n, passes
            n = _gen_list_pass(vol, lut, pv, ox, oy, oz, dx, dy, dz,
                               ax0, ay0, az0, ax1, ay1, az1,
                               t0, t1, step, lref, g, n_sg, True, out_seg, tseg)
            passes += 1
            return g, n, passes
        n = _gen_list_pass(vol, lut, pv, ox, oy, oz, dx, dy, dz,
                           ax0, ay0, az0, ax1, ay1, az1,
                           t0, t1, step, lref, gamma, n_sg, False, out_seg, tseg)
        passes += 1
        last_n = n
        if first:
            first = False
            if n < n_sg:
                # homogeneous or empty ray: done after a single pass
                return gamma, n, passes
        if n > n_sg:
            low = gamma
        elif n < n_sg - delta:
            high = gamma
            high_n = n
            for i in range(n):
                for c in range(6):
                    high_seg[i, c] = out_seg[i, c]
        else:
            return gamma, n, passes
        gamma = 0.5 * (low + high)


@njit(cache=True, parallel=True)
def _generate_kernel(vol, lut, pv, inv_pv, px, py, pz,
                     ax0, ay0, az0, ax1, ay1, az1,
                     width, height, n_sg, delta, eps, gamma_init, step, lref,
                     counts, segs, gammas, passes):
    for idx in prange(height * width):
        ly = idx // width
        lx = idx % width
        ndcx = 2.0 * (lx + 0.5) / width - 1.0
        ndcy = 2.0 * (ly + 0.5) / height - 1.0
        wx, wy, wz = world_of(inv_pv, ndcx, ndcy, -1.0)
        dx = wx - px
        dy = wy - py
        dz = wz - pz
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= norm
        dy /= norm
        dz /= norm
        hit, ta, tb = clip_aabb(px, py, pz, dx, dy, dz, ax0, ay0, az0, ax1, ay1, az1)
        counts[ly, lx] = 0
        gammas[ly, lx] = 0.0
        passes[ly, lx] = 0
        if not hit:
            continue
        fhit, fa, fb = clip_frustum(pv, px, py, pz, dx, dy, dz)
        if not fhit:
            continue
        t0 = max(max(ta, fa), 0.0)
        t1 = min(tb, fb)
        if t1 <= t0:
            continue
        out_seg = segs[ly, lx]
        tseg = np.empty((n_sg, 2), dtype=np.float64)
        high_seg = np.empty((n_sg, 6), dtype=np.float32)
        g, n, p = _find_gamma_list(vol, lut, pv, px, py, pz, dx, dy, dz,
                                   ax0, ay0, az0, ax1, ay1, az1,
                                   t0, t1, step, lref, n_sg, delta, eps, gamma_init,
                                   out_seg, tseg, high_seg)
        counts[ly, lx] = n
        gammas[ly, lx] = g
        passes[ly, lx] = p
        for i in range(n, n_sg):
            for c in range(6):
                out_seg[i, c] = 0.0


@njit(cache=True)
def _accumulate_grid(counts, segs, width, height, gx, gy, gz, near, far,
                     proj_a, proj_b, gcounts):
    for ly in range(height):
        cy0 = (ly * gy) // height
        cy1 = ((ly + 1) * gy - 1) // height
        for lx in range(width):
            n = counts[ly, lx]
            if n == 0:
                continue
            cx0 = (lx * gx) // width
            cx1 = ((lx + 1) * gx - 1) // width
            for k in range(n):
                zf = segs[ly, lx, k, 0]
                zb = segs[ly, lx, k, 1]
                d0 = proj_b / (proj_a - zf)
                d1 = proj_b / (proj_a - zb)
                k0 = int(math.floor((d0 - near) / (far - near) * gz))
                k1 = int(math.floor((d1 - near) / (far - near) * gz))
                k0 = min(max(k0, 0), gz - 1)
                k1 = min(max(k1, 0), gz - 1)
                for cz in range(k0, k1 + 1):
                    for cy in range(cy0, cy1 + 1):
                        for cx in range(cx0, cx1 + 1):
                            gcounts[cz, cy, cx] += 1


def _depth_consts(cam: Camera) -> tuple[float, float]:
    """Constants for ndc_z -> view depth: depth = b / (a - z)."""
    n, f = cam.near, cam.far
    a = (f + n) / (f - n)
    b = 2.0 * f * n / (f - n)
    return a, b


def terminate_check(seg_color, seg_alpha, sample_rgba, step_len, gamma) -> bool:
    """True iff a new supersegment must start.

    seg_color is the segment's premultiplied representative color; the sample's
    opacity is length-adjusted by step_len (in units of the reference step)
    before premultiplying. The distance is the L2 norm over the 3 color
    channels.
    """
    a_adj = 1.0 - (1.0 - float(sample_rgba[3])) ** float(step_len)
    d = math.sqrt(sum((float(seg_color[c]) - float(sample_rgba[c]) * a_adj) ** 2
                      for c in range(3)))
    return d >= gamma


def generate_list(ray: Ray, vol: Volume, tf: TransferFunction, gamma: float,
                  params: GenParams, cam: Camera, capped: bool = False):
    """Single-ray generation pass; returns (count, segments, exceeded)."""
    _, step, lref = params.resolve(vol)
    out_seg = np.zeros((params.n_sg, 6), dtype=np.float32)
    tseg = np.zeros((params.n_sg, 2), dtype=np.float64)
    aabb = _vol_aabb(vol)
    clipped = _clip_for_generation(ray, aabb, cam)
    if clipped is None:
        return 0, out_seg, False
    t0, t1 = clipped
    n = _gen_list_pass(vol.normalized, tf.lut, cam.proj_view(),
                       *ray.origin, *ray.dir, *aabb[0], *aabb[1],
                       t0, t1, step, lref, float(gamma), params.n_sg, capped,
                       out_seg, tseg)
    exceeded = n > params.n_sg
    return min(n, params.n_sg), out_seg, exceeded


def find_gamma(ray: Ray, vol: Volume, tf: TransferFunction, params: GenParams,
               cam: Camera):
    """Per-ray bisection; returns (gamma, count, segments, passes)."""
    delta, step, lref = params.resolve(vol)
    out_seg = np.zeros((params.n_sg, 6), dtype=np.float32)
    tseg = np.zeros((params.n_sg, 2), dtype=np.float64)
    high_seg = np.zeros((params.n_sg, 6), dtype=np.float32)
    aabb = _vol_aabb(vol)
    clipped = _clip_for_generation(ray, aabb, cam)
    if clipped is None:
        return params.gamma_init, 0, out_seg, 0
    t0, t1 = clipped
    g, n, p = _find_gamma_list(vol.normalized, tf.lut, cam.proj_view(),
                               *ray.origin, *ray.dir, *aabb[0], *aabb[1],
                               t0, t1, step, lref, params.n_sg, delta,
                               params.epsilon, params.gamma_init,
                               out_seg, tseg, high_seg)
    return g, n, out_seg, p


def _vol_aabb(vol: Volume) -> np.ndarray:
    return vol.aabb


def _clip_for_generation(ray: Ray, aabb, cam: Camera):
    hit, ta, tb = clip_aabb(*ray.origin, *ray.dir, *aabb[0], *aabb[1])
    if not hit:
        return None
    fhit, fa, fb = clip_frustum(cam.proj_view(), *ray.origin, *ray.dir)
    if not fhit:
        return None
    t0 = max(ta, fa, 0.0)
    t1 = min(tb, fb)
    if t1 <= t0:
        return None
    return t0, t1


@dataclass(frozen=True)
class GenStats:
    gammas: np.ndarray        # (H, W) final gamma per list
    passes: np.ndarray        # (H, W) volume passes per list
    wall_time_s: float

    @property
    def max_passes(self) -> int:
        return int(self.passes.max())

    @property
    def mean_passes(self) -> float:
        active = self.passes[self.passes > 0]
        return float(active.mean()) if active.size else 0.0


def generate_vdi(vol: Volume, tf: TransferFunction, cam: Camera,
                 params: GenParams | None = None, grid_dims=None,
                 with_stats: bool = False):
    """Generate a Vdi + AccelGrid from camera `cam` (one ray per viewport pixel)."""
    params = params or GenParams()
    delta, step, lref = params.resolve(vol)
    width, height = cam.viewport
    counts = np.zeros((height, width), dtype=np.int32)
    segs = np.zeros((height, width, params.n_sg, 6), dtype=np.float32)
    gammas = np.zeros((height, width), dtype=np.float64)
    passes = np.zeros((height, width), dtype=np.int32)
    aabb = vol.aabb

    t_start = time.perf_counter()
    _generate_kernel(vol.normalized, tf.lut, cam.proj_view(), cam.inv_proj_view(),
                     *np.asarray(cam.position, dtype=np.float64),
                     *aabb[0], *aabb[1],
                     width, height, params.n_sg, delta, params.epsilon,
                     params.gamma_init, step, lref,
                     counts, segs, gammas, passes)

    if grid_dims is None:
        grid_dims = default_grid_dims(width, height)
    gx, gy, gz = grid_dims
    gcounts = np.zeros((gz, gy, gx), dtype=np.uint32)
    proj_a, proj_b = _depth_consts(cam)
    _accumulate_grid(counts, segs, width, height, gx, gy, gz,
                     cam.near, cam.far, proj_a, proj_b, gcounts)
    wall = time.perf_counter() - t_start

    vdi = Vdi(width=width, height=height, n_sg=params.n_sg, counts=counts,
              segs=segs, gen_camera=cam, volume_aabb=aabb)
    grid = AccelGrid(dims=(gx, gy, gz), counts=gcounts, near=cam.near, far=cam.far)
    if with_stats:
        return vdi, grid, GenStats(gammas=gammas, passes=passes, wall_time_s=wall)
    return vdi, grid
