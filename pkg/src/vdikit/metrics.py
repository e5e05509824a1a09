"""Image quality metrics: SSIM (11x11 Gaussian window on BT.709 luma) and PSNR."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter

from .image import Image

_LUMA = np.array([0.2126, 0.7152, 0.0722])
_SIGMA = 1.5
_RADIUS = 5  # 11x11 window
_TRUNCATE = 3.5
K1 = 0.01
K2 = 0.03


class DimensionMismatch(ValueError):
    pass


def _as_array(img) -> np.ndarray:
    data = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 4:
        raise DimensionMismatch(f"expected (h, w, 4) rgba, got {data.shape}")
    return data


def _luma(data: np.ndarray) -> np.ndarray:
    return np.clip(data[..., :3], 0.0, 1.0) @ _LUMA


def _check(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")


def ssim(a, b) -> float:
    """Mean structural similarity of the luma channels; 1.0 for identical images.

    Accepts Image objects or (h, w, 4) float arrays in [0, 1].
    """
    a, b = _as_array(a), _as_array(b)
    _check(a, b)
    x = _luma(a)
    y = _luma(b)
    c1 = K1 * K1
    c2 = K2 * K2

    def f(v):
        return gaussian_filter(v, _SIGMA, truncate=_TRUNCATE, mode="reflect")

    mx = f(x)
    my = f(y)
    mxx = f(x * x)
    myy = f(y * y)
    mxy = f(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    s = num / den
    # exclude the filter's border region from the mean
    r = _RADIUS
    if s.shape[0] > 2 * r and s.shape[1] > 2 * r:
        s = s[r:-r, r:-r]
    return float(np.mean(s))


def psnr(a, b) -> float:
    """10*log10(1/MSE) in dB over all rgba channels; +inf for identical images."""
    a, b = _as_array(a), _as_array(b)
    _check(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
