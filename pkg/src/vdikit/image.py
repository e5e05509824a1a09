"""Float RGBA framebuffer with PNG and binary PPM output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PilImage


@dataclass(frozen=True)
class Image:
    """RGBA image, float64 in [0, 1], premultiplied alpha, row 0 at the bottom."""

    data: np.ndarray  # (h, w, 4) float64

    @staticmethod
    def from_array(arr: np.ndarray) -> "Image":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError(f"expected (h, w, 4), got {arr.shape}")
        return Image(data=arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def rgb(self) -> np.ndarray:
        """Premultiplied RGB channels, clipped to [0, 1]."""
        return np.clip(self.data[..., :3], 0.0, 1.0)

    def to_uint8(self) -> np.ndarray:
        """8-bit RGB, flipped so row 0 is the top (file convention)."""
        rgb = np.rint(self.rgb() * 255.0).astype(np.uint8)
        return rgb[::-1]

    def save_png(self, path: str) -> None:
        PilImage.fromarray(self.to_uint8(), mode="RGB").save(path, format="PNG")

    def save_ppm(self, path: str) -> None:
        rgb = self.to_uint8()
        with open(path, "wb") as f:
            f.write(b"P6\n%d %d\n255\n" % (self.width, self.height))
            f.write(rgb.tobytes())

    def png_bytes(self) -> bytes:
        import io

        buf = io.BytesIO()
        PilImage.fromarray(self.to_uint8(), mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


def save_image(img: Image, path: str) -> None:
    """Write PNG or PPM depending on the file extension."""
    if str(path).lower().endswith((".ppm",)):
        img.save_ppm(path)
    else:
        img.save_png(path)
