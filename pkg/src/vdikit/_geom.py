"""Shared numba helpers for the render/generate kernels.

All transforms take 4x4 float64 matrices (projection*view or its inverse)
produced by the Camera class.
"""

import math

from numba import njit


@njit(cache=True, inline="always")
def ndc_of(m, x, y, z):
    """Project a world point; returns (ndc_x, ndc_y, ndc_z)."""
    hx = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
    hy = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
    hz = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    hw = m[3, 0] * x + m[3, 1] * y + m[3, 2] * z + m[3, 3]
    return hx / hw, hy / hw, hz / hw


@njit(cache=True, inline="always")
def world_of(minv, x, y, z):
    """Unproject an NDC point; returns (wx, wy, wz)."""
    return ndc_of(minv, x, y, z)


@njit(cache=True, inline="always")
def clip_aabb(ox, oy, oz, dx, dy, dz, ax0, ay0, az0, ax1, ay1, az1):
    """Slab ray/AABB clip; returns (hit, t0, t1)."""
    t0 = -math.inf
    t1 = math.inf
    for a in range(3):
        if a == 0:
            o, d, lo, hi = ox, dx, ax0, ax1
        elif a == 1:
            o, d, lo, hi = oy, dy, ay0, ay1
        else:
            o, d, lo, hi = oz, dz, az0, az1
        if abs(d) < 1e-300:
            if o < lo or o > hi:
                return False, 0.0, 0.0
        else:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t1 < t0:
        return False, 0.0, 0.0
    return True, t0, t1


@njit(cache=True, inline="always")
def clip_frustum(m, ox, oy, oz, dx, dy, dz):
    """Clip a ray against the frustum of projection*view matrix m.

    Homogeneous clipping: w > 0 and -w <= c <= w for c in (x, y, z).
    Returns (hit, t0, t1).
    """
    p0x = m[0, 0] * ox + m[0, 1] * oy + m[0, 2] * oz + m[0, 3]
    p0y = m[1, 0] * ox + m[1, 1] * oy + m[1, 2] * oz + m[1, 3]
    p0z = m[2, 0] * ox + m[2, 1] * oy + m[2, 2] * oz + m[2, 3]
    p0w = m[3, 0] * ox + m[3, 1] * oy + m[3, 2] * oz + m[3, 3]
    pdx = m[0, 0] * dx + m[0, 1] * dy + m[0, 2] * dz
    pdy = m[1, 0] * dx + m[1, 1] * dy + m[1, 2] * dz
    pdz = m[2, 0] * dx + m[2, 1] * dy + m[2, 2] * dz
    pdw = m[3, 0] * dx + m[3, 1] * dy + m[3, 2] * dz

    t0 = -math.inf
    t1 = math.inf
    for i in range(7):
        if i == 0:
            c, d = p0w, pdw
        elif i == 1:
            c, d = p0w - p0x, pdw - pdx
        elif i == 2:
            c, d = p0w + p0x, pdw + pdx
        elif i == 3:
            c, d = p0w - p0y, pdw - pdy
        elif i == 4:
            c, d = p0w + p0y, pdw + pdy
        elif i == 5:
            c, d = p0w - p0z, pdw - pdz
        else:
            c, d = p0w + p0z, pdw + pdz
        # require c + t*d >= 0
        if abs(d) < 1e-300:
            if c < 0:
                return False, 0.0, 0.0
        else:
            t = -c / d
            if d > 0:
                if t > t0:
                    t0 = t
            else:
                if t < t1:
                    t1 = t
    if t1 < t0:
        return False, 0.0, 0.0
    return True, t0, t1
