"""Display client: quality-mode switching and headless replay."""

import math
import os
import threading
import time

import numpy as np
import pytest

from vdikit.camera import orbit_camera
from vdikit.client import (MODE_FULL, MODE_PREVIEW, RenderClient, run_headless,
                           view_deviation_deg)
from vdikit.generate import GenParams, generate_vdi
from vdikit.proto import VdiServer, connect, make_listener
from vdikit.vdi import encode_vdi


def _orbit(vol_center, az, viewport=(64, 64)):
    return orbit_camera(vol_center, 179.2, az, 0.0, fov_y=math.radians(45),
                        near=26.88, far=300.0, viewport=viewport)


def test_view_deviation_identical_is_zero(sphere_vdi_small):
    _, _, cam, _, _, _ = sphere_vdi_small
    assert view_deviation_deg(cam, cam) == pytest.approx(0.0, abs=1e-9)


def test_view_deviation_orbit_angles():
    c = (32.0, 32.0, 32.0)
    a = _orbit(c, 0.0)
    for az in (10.0, 45.0, 90.0):
        b = _orbit(c, az)
        assert view_deviation_deg(a, b) == pytest.approx(az, abs=1e-6)


class _FakeConn:
    """Socket stand-in; the mode-switch tests never touch the network."""

    def sendall(self, data):
        pass

    def close(self):
        pass


def _client_with_vdi(vdi, grid, viewport, target_fps):
    client = RenderClient(_FakeConn(), viewport=viewport, target_fps=target_fps)
    client.buffers.publish(vdi, grid, None)
    return client


def test_fast_frames_stay_full_quality(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    client = _client_with_vdi(vdi, grid, cam.viewport, target_fps=0.1)
    client.set_pose(cam)
    for _ in range(8):
        img, hud = client.render_frame()
        assert hud.mode == MODE_FULL


def test_sustained_slow_frames_switch_to_preview(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    # an absurd target makes every frame a slow frame
    client = _client_with_vdi(vdi, grid, cam.viewport, target_fps=100000.0)
    client.set_pose(cam)
    modes = [client.render_frame()[1].mode for _ in range(8)]
    assert modes[:4] == [MODE_FULL] * 4   # needs 5 consecutive slow frames
    assert modes[5:] == [MODE_PREVIEW] * 3
    assert client.pi.d_i < 1.0            # the controller reacted


def test_new_vdi_restores_full_quality(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    client = _client_with_vdi(vdi, grid, cam.viewport, target_fps=100000.0)
    client.set_pose(cam)
    for _ in range(7):
        client.render_frame()
    assert client.render_frame()[1].mode == MODE_PREVIEW
    client.buffers.publish(vdi, grid, None)  # fresh VDI arrives
    img, hud = client.render_frame()
    assert hud.new_vdi
    assert hud.mode == MODE_FULL


def test_no_frame_without_pose_or_vdi(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    client = RenderClient(_FakeConn(), viewport=cam.viewport)
    assert client.render_frame() is None          # no VDI, no pose
    client.set_pose(cam)
    assert client.render_frame() is None          # still no VDI
    client.buffers.publish(vdi, grid, None)
    assert client.render_frame() is not None


def test_run_headless_against_live_server(sphere64, tmp_path):
    vol, tf = sphere64

    def gen(cam):
        vdi, grid = generate_vdi(vol, tf, cam, GenParams(n_sg=8))
        return encode_vdi(vdi, grid)

    listener = make_listener("127.0.0.1", 0)
    port = listener.getsockname()[1]
    server = VdiServer(listener, gen, viewport=(64, 64))
    server.start()
    try:
        conn = connect("127.0.0.1", port)
        center = (32.0, 32.0, 32.0)
        cams = [_orbit(center, az) for az in (0.0, 15.0, 30.0)]
        out_dir = str(tmp_path / "frames")
        written = run_headless(conn, cams, out_dir, viewport=(64, 64), n_sg=8)
        assert len(written) == 3
        for path in written:
            assert os.path.getsize(path) > 0
        assert server.stats.generations >= 1
    finally:
        server.shutdown()
