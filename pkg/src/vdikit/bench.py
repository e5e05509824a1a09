"""Camera-path benchmark: replay views against a fixed VDI and score them.

For each view the VDI render is timed and compared against the ground-truth
direct volume render; rows go to CSV
(frame_index, angle_deg, frame_ms, ssim, psnr, lists_visited,
supersegments_intersected) and figures are rendered next to the CSV.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .camera import Camera, orbit_camera
from .dvr import render_dvr
from .generate import GenParams, generate_vdi
from .metrics import psnr, ssim
from .raycast import RenderOptions, render_vdi
from .report import render_bench_figures
from .volume import TransferFunction, Volume

CSV_FIELDS = ("frame_index", "angle_deg", "frame_ms", "ssim", "psnr",
              "lists_visited", "supersegments_intersected")


def sweep_cameras(vol: Volume, angles_deg, viewport=(256, 256),
                  fov_y: float = math.radians(45.0),
                  elevation_deg: float = 0.0) -> list[Camera]:
    """Orbit cameras about the dataset center at the given azimuth angles."""
    size = vol.world_size
    center = size / 2.0
    radius = 2.8 * float(size.max())
    half_diag = 0.5 * float(np.linalg.norm(size))
    return [
        orbit_camera(center, radius, a, elevation_deg, fov_y=fov_y,
                     near=0.15 * radius, far=radius + 2.0 * half_diag,
                     viewport=viewport)
        for a in angles_deg
    ]


def run_bench(vol: Volume, tf: TransferFunction, angles_deg,
              params: GenParams | None = None, viewport=(256, 256),
              use_ess: bool = True, dvr_step: float | None = None) -> list[dict]:
    """Generate a VDI at angle 0 and replay the sweep; returns CSV-shaped rows."""
    params = params or GenParams()
    cams = sweep_cameras(vol, [0.0, *angles_deg], viewport=viewport)
    gen_cam, view_cams = cams[0], cams[1:]
    vdi, grid = generate_vdi(vol, tf, gen_cam, params=params)
    opts = RenderOptions(use_ess=use_ess)
    rows = []
    for i, (angle, cam) in enumerate(zip(angles_deg, view_cams)):
        img, stats = render_vdi(vdi, grid, cam, opts, with_stats=True)
        truth = render_dvr(vol, tf, cam, step=dvr_step)
        rows.append({
            "frame_index": i,
            "angle_deg": float(angle),
            "frame_ms": stats.frame_ms,
            "ssim": ssim(img, truth),
            "psnr": psnr(img, truth),
            "lists_visited": stats.lists_visited,
            "supersegments_intersected": stats.supersegments_intersected,
        })
    return rows


def write_bench_csv(rows: list[dict], path: str, figures: bool = True
                    ) -> list[str]:
    """Write rows as CSV; render the companion figures unless disabled."""
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in CSV_FIELDS})
    written = [path]
    if figures:
        written += render_bench_figures(rows, path)
    return written
