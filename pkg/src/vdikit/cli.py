"""Command-line entry points.

Exit codes: 0 success, 2 usage error, 3 IO/codec failure, 4 invariant
violation.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import sys

import click
import numpy as np

from . import lz4
from .bench import CSV_FIELDS, run_bench, sweep_cameras, write_bench_csv
from .camera import Camera, load_camera, load_camera_path, save_camera
from .dvr import render_dvr
from .generate import GenParams, generate_vdi
from .image import save_image
from .preview import PreviewParams, render_preview
from .proto import connect, make_listener, server_loop
from .raycast import RenderOptions, render_vdi
from .synth import PRESETS, preset_camera, preset_tf, preset_volume
from .vdi import (BadMagic, InvariantViolation, TruncatedStream,
                  VersionMismatch, load_vdi, save_vdi)
from .volume import (SizeMismatch, TransferFunction, UnsupportedVoxelType,
                     load_volume_with_sidecar, save_raw_volume)

EXIT_IO = 3
EXIT_INVARIANT = 4

_IO_ERRORS = (OSError, BadMagic, VersionMismatch, TruncatedStream,
              SizeMismatch, UnsupportedVoxelType, lz4.DecompressFailure,
              json.JSONDecodeError, KeyError)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InvariantViolation as e:
            click.echo(f"error: invariant violation: {e}", err=True)
            sys.exit(EXIT_INVARIANT)
        except _IO_ERRORS as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_IO)
    return wrapper


@click.group()
def main():
    """Volumetric depth image toolkit."""


def _viewport_opts(fn):
    fn = click.option("--width", default=256, show_default=True)(fn)
    fn = click.option("--height", default=256, show_default=True)(fn)
    return fn


@main.command()
@click.option("--volume", "volume_path", required=True,
              help="JSON sidecar of a raw volume.")
@click.option("--tf", "tf_path", required=True, help="Transfer function JSON.")
@click.option("--camera", "camera_path", required=True, help="Camera pose JSON.")
@click.option("--n-sg", default=12, show_default=True,
              help="Supersegments per list.")
@_viewport_opts
@click.option("--out", "out_path", required=True, help="Output .vdi file.")
@_guarded
def generate(volume_path, tf_path, camera_path, n_sg, width, height, out_path):
    """Generate a VDI from a volume, transfer function, and camera."""
    vol = load_volume_with_sidecar(volume_path)
    tf = TransferFunction.from_json(tf_path)
    cam = load_camera(camera_path, (width, height))
    vdi, grid, stats = generate_vdi(vol, tf, cam, GenParams(n_sg=n_sg),
                                    with_stats=True)
    save_vdi(vdi, grid, out_path)
    active = stats.passes[stats.passes > 0]
    click.echo(f"wrote {out_path}: {width}x{height} lists, n_sg={n_sg}")
    click.echo(f"volume passes per ray: max={stats.max_passes} "
               f"mean={stats.mean_passes:.2f} "
               f"single-pass rays={(int((active == 1).sum()) if active.size else 0)}")
    click.echo(f"generation wall time: {stats.wall_time_s:.3f} s")


@main.command()
@click.option("--vdi", "vdi_path", required=True)
@click.option("--camera", "camera_path", required=True)
@click.option("--ess", type=click.Choice(["on", "off"]), default="on",
              show_default=True)
@click.option("--d-i", type=float, default=None,
              help="Preview image factor; with --d-r enables preview mode.")
@click.option("--d-r", type=float, default=None,
              help="Preview along-ray sampling rate.")
@_viewport_opts
@click.option("--out", "out_path", required=True, help="Output PNG/PPM.")
@click.option("--stats", "stats_path", default=None, help="Optional stats CSV.")
@_guarded
def render(vdi_path, camera_path, ess, d_i, d_r, width, height, out_path,
           stats_path):
    """Render a VDI from a novel viewpoint (full quality or preview)."""
    vdi, grid = load_vdi(vdi_path)
    cam = load_camera(camera_path, (width, height))
    if d_i is not None or d_r is not None:
        params = PreviewParams(d_i=d_i if d_i is not None else 1.0,
                               d_r=d_r if d_r is not None else 1.0,
                               display=(width, height))
        img, pstats = render_preview(vdi, grid, cam, params, with_stats=True)
        rows = [("mode", "preview"), ("frame_ms", f"{pstats.frame_ms:.3f}"),
                ("total_samples", pstats.total_samples)]
    else:
        opts = RenderOptions(use_ess=(ess == "on"))
        img, rstats = render_vdi(vdi, grid, cam, opts, with_stats=True)
        rows = [("mode", "full"), ("frame_ms", f"{rstats.frame_ms:.3f}"),
                ("lists_visited", rstats.lists_visited),
                ("supersegments_intersected", rstats.supersegments_intersected)]
    save_image(img, out_path)
    click.echo(f"wrote {out_path}")
    if stats_path:
        with open(stats_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([k for k, _ in rows])
            w.writerow([v for _, v in rows])
        click.echo(f"wrote {stats_path}")


@main.command()
@click.option("--volume", "volume_path", required=True)
@click.option("--tf", "tf_path", required=True)
@click.option("--camera", "camera_path", required=True)
@click.option("--step", type=float, default=None,
              help="Sampling step in world units; default half min spacing.")
@_viewport_opts
@click.option("--out", "out_path", required=True)
@_guarded
def dvr(volume_path, tf_path, camera_path, step, width, height, out_path):
    """Ground-truth direct volume render."""
    vol = load_volume_with_sidecar(volume_path)
    tf = TransferFunction.from_json(tf_path)
    cam = load_camera(camera_path, (width, height))
    img = render_dvr(vol, tf, cam, step=step)
    save_image(img, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--volume", "volume_path", required=True)
@click.option("--tf", "tf_path", required=True)
@click.option("--angles", default="5,10,20,40", show_default=True,
              help="View deviation sweep in degrees.")
@click.option("--n-sg", default=12, show_default=True)
@_viewport_opts
@click.option("--no-figures", is_flag=True, help="Write only the CSV.")
@click.option("--out", "out_path", required=True, help="Output CSV.")
@_guarded
def bench(volume_path, tf_path, angles, n_sg, width, height, no_figures,
          out_path):
    """Replay an orbit sweep; write per-frame quality/cost CSV and figures."""
    vol = load_volume_with_sidecar(volume_path)
    tf = TransferFunction.from_json(tf_path)
    try:
        angle_list = [float(a) for a in angles.split(",") if a.strip()]
    except ValueError as e:
        raise click.UsageError(f"bad --angles: {e}")
    rows = run_bench(vol, tf, angle_list, GenParams(n_sg=n_sg),
                     viewport=(width, height))
    written = write_bench_csv(rows, out_path, figures=not no_figures)
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--preset", type=click.Choice(PRESETS), required=True)
@click.option("--dims", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--noise", default=0, show_default=True,
              help="Seeded jitter amplitude added to occupied voxels.")
@click.option("--out", "out_path", required=True, help="Output .raw path.")
@click.option("--tf-out", default=None, help="Also write the preset TF JSON.")
@click.option("--camera-out", default=None,
              help="Also write a framing camera pose JSON.")
@_guarded
def synth(preset, dims, seed, noise, out_path, tf_out, camera_out):
    """Write a deterministic synthetic volume (raw + JSON sidecar)."""
    vol = preset_volume(preset, dims, seed=seed, noise=noise)
    meta_path = out_path.rsplit(".", 1)[0] + ".json"
    save_raw_volume(vol, out_path, meta_path)
    click.echo(f"wrote {out_path} and {meta_path}")
    if tf_out:
        preset_tf(preset).to_json(tf_out)
        click.echo(f"wrote {tf_out}")
    if camera_out:
        save_camera(preset_camera(vol), camera_out)
        click.echo(f"wrote {camera_out}")


def _parse_endpoint(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"expected host:port, got {value!r}")
    return host, int(port)


@main.command()
@click.option("--volume", "volume_path", required=True)
@click.option("--tf", "tf_path", required=True)
@click.option("--listen", default="127.0.0.1:7711", show_default=True)
@click.option("--n-sg", default=12, show_default=True)
@_viewport_opts
@_guarded
def serve(volume_path, tf_path, listen, n_sg, width, height):
    """Serve VDIs: newest client pose in, compressed VDI stream out."""
    vol = load_volume_with_sidecar(volume_path)
    tf = TransferFunction.from_json(tf_path)
    host, port = _parse_endpoint(listen)
    listener = make_listener(host, port)
    click.echo(f"serving on {host}:{port}")
    server_loop(vol, tf, GenParams(n_sg=n_sg), listener,
                viewport=(width, height))


@main.command()
@click.option("--connect", "endpoint", default="127.0.0.1:7711",
              show_default=True)
@click.option("--headless", is_flag=True, help="Replay poses, render to disk.")
@click.option("--poses", "poses_path", default=None,
              help="Camera path JSON for --headless.")
@click.option("--out-dir", default="frames", show_default=True)
@click.option("--viewer-port", type=int, default=None,
              help="Expose the browser viewer bridge on this port.")
@click.option("--camera", "camera_path", default=None,
              help="Initial camera pose JSON.")
@click.option("--target-fps", default=30.0, show_default=True)
@click.option("--d-r", default=1.0, show_default=True)
@click.option("--n-sg", default=12, show_default=True)
@_viewport_opts
@_guarded
def client(endpoint, headless, poses_path, out_dir, viewer_port, camera_path,
           target_fps, d_r, n_sg, width, height):
    """Display client: receives VDIs and renders them locally."""
    from .client import RenderClient, run_headless

    host, port = _parse_endpoint(endpoint)
    conn = connect(host, port)
    viewport = (width, height)
    if headless:
        if not poses_path:
            raise click.UsageError("--headless requires --poses")
        cams = load_camera_path(poses_path, viewport)
        written = run_headless(conn, cams, out_dir, viewport=viewport,
                               n_sg=n_sg)
        click.echo(f"wrote {len(written)} frames to {out_dir}")
        return
    if viewer_port is None:
        raise click.UsageError("need --headless or --viewer-port")
    if not camera_path:
        raise click.UsageError("--viewer-port requires --camera for the "
                               "initial pose")
    base_cam = load_camera(camera_path, viewport)
    rc = RenderClient(conn, viewport=viewport, target_fps=target_fps,
                      d_r=d_r, n_sg=n_sg)
    rc.set_pose(base_cam)
    from .bridge import ViewerBridge

    bridge = ViewerBridge(rc, base_cam, port=viewer_port)
    rc.start()
    bridge.start()
    click.echo(f"viewer at http://127.0.0.1:{viewer_port}/")
    try:
        while True:
            import time

            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        bridge.shutdown()
        rc.shutdown()


if __name__ == "__main__":
    main()
