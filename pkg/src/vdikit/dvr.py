"""Ground-truth direct volume renderer (emission-absorption).

Uses the exact same ray setup, midpoint sampler, and opacity length
normalization as VDI generation, so an identity-viewpoint comparison between
the two isolates the representation error alone.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from ._geom import clip_aabb, clip_frustum, world_of
from .camera import Camera
from .image import Image
from .volume import TransferFunction, Volume, _sample_classified


@njit(cache=True, parallel=True)
def _dvr_kernel(vol, lut, pv, inv_pv, px, py, pz,
                ax0, ay0, az0, ax1, ay1, az1,
                width, height, step, lref, early_term, bg, img):
    ex = ax1 - ax0
    ey = ay1 - ay0
    ez = az1 - az0
    for idx in prange(height * width):
        row = idx // width
        col = idx % width
        ndcx = 2.0 * (col + 0.5) / width - 1.0
        ndcy = 2.0 * (row + 0.5) / height - 1.0
        wx, wy, wz = world_of(inv_pv, ndcx, ndcy, -1.0)
        dx = wx - px
        dy = wy - py
        dz = wz - pz
        norm = math.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= norm
        dy /= norm
        dz /= norm

        acc_r = acc_g = acc_b = acc_a = 0.0
        hit, ta, tb = clip_aabb(px, py, pz, dx, dy, dz, ax0, ay0, az0, ax1, ay1, az1)
        if hit:
            fhit, fa, fb = clip_frustum(pv, px, py, pz, dx, dy, dz)
            if fhit:
                t0 = max(max(ta, fa), 0.0)
                t1 = min(tb, fb)
                if t1 > t0:
                    nsteps = int(math.ceil((t1 - t0) / step))
                    for k in range(nsteps):
                        sa = t0 + k * step
                        sb = sa + step
                        if sb > t1:
                            sb = t1
                        if sb <= sa:
                            break
                        tm = 0.5 * (sa + sb)
                        qx = (px + tm * dx - ax0) / ex
                        qy = (py + tm * dy - ay0) / ey
                        qz = (pz + tm * dz - az0) / ez
                        qx = min(max(qx, 0.0), 1.0)
                        qy = min(max(qy, 0.0), 1.0)
                        qz = min(max(qz, 0.0), 1.0)
                        rgba = _sample_classified(vol, lut, qx, qy, qz)
                        a = rgba[3]
                        if a <= 0.0:
                            continue
                        a_adj = 1.0 - (1.0 - a) ** ((sb - sa) / lref)
                        w = 1.0 - acc_a
                        acc_r += w * rgba[0] * a_adj
                        acc_g += w * rgba[1] * a_adj
                        acc_b += w * rgba[2] * a_adj
                        acc_a += w * a_adj
                        if acc_a >= early_term:
                            break
        w = 1.0 - acc_a
        img[row, col, 0] = acc_r + w * bg[0] * bg[3]
        img[row, col, 1] = acc_g + w * bg[1] * bg[3]
        img[row, col, 2] = acc_b + w * bg[2] * bg[3]
        img[row, col, 3] = acc_a + w * bg[3]


def render_dvr(vol: Volume, tf: TransferFunction, cam: Camera,
               step: float | None = None, ref_step: float | None = None,
               early_term_alpha: float = 0.999,
               background=(0.0, 0.0, 0.0, 1.0)) -> Image:
    """Front-to-back emission-absorption raycast of the classified volume."""
    if step is None:
        step = 0.5 * min(vol.spacing)
    if step <= 0:
        raise ValueError("step must be > 0")
    lref = ref_step if ref_step is not None else step
    width, height = cam.viewport
    img = np.zeros((height, width, 4), dtype=np.float64)
    aabb = vol.aabb
    bg = np.asarray(background, dtype=np.float64)
    _dvr_kernel(vol.normalized, tf.lut, cam.proj_view(), cam.inv_proj_view(),
                *np.asarray(cam.position, dtype=np.float64),
                *aabb[0], *aabb[1],
                width, height, float(step), float(lref), float(early_term_alpha),
                bg, img)
    return Image.from_array(img)
