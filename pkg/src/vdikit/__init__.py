"""vdikit: volumetric depth image toolkit.

Generate per-pixel supersegment lists from a volume, render them from novel
viewpoints, preview them under a frame-rate budget, and stream them compressed
to remote clients.
"""

from .camera import Camera, Ray, generate_ray, look_at, orbit_camera
from .dvr import render_dvr
from .generate import GenParams, GenStats, find_gamma, generate_vdi
from .image import Image, save_image
from .metrics import psnr, ssim
from .preview import PiController, PreviewParams, render_preview, samples_in_cell
from .raycast import (RenderOptions, RenderStats, composite_lists,
                      find_first_supersegment, render_vdi)
from .synth import preset_camera, preset_tf, preset_volume
from .vdi import AccelGrid, Vdi, decode_vdi, encode_vdi, load_vdi, save_vdi
from .volume import TransferFunction, Volume, load_volume_with_sidecar, make_volume

__version__ = "0.1.0"

__all__ = [
    "AccelGrid", "Camera", "GenParams", "GenStats", "Image", "PiController",
    "PreviewParams", "Ray", "RenderOptions", "RenderStats", "TransferFunction",
    "Vdi", "Volume", "composite_lists", "decode_vdi", "encode_vdi",
    "find_first_supersegment", "find_gamma", "generate_ray", "generate_vdi",
    "load_vdi", "load_volume_with_sidecar", "look_at", "make_volume",
    "orbit_camera", "preset_camera", "preset_tf", "preset_volume", "psnr",
    "render_dvr", "render_preview", "render_vdi", "samples_in_cell",
    "save_image", "save_vdi", "ssim",
]
