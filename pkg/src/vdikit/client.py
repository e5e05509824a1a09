"""Display-side client: receives VDIs, renders locally, adapts quality.

The render loop always draws from the double-buffered latest VDI. When the
measured frame rate stays under target for 5 consecutive frames it switches to
preview rendering (PI-controlled d_i); a buffer swap switches back to full
quality immediately.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .image import Image
from .preview import PiController, PreviewParams, render_preview
from .proto import DoubleBuffer, client_recv_and_swap, send_control, send_pose
from .raycast import RenderOptions, render_vdi

MODE_FULL = 0
MODE_PREVIEW = 1


@dataclass(frozen=True)
class Hud:
    fps: float
    mode: int
    vdi_age_ms: float
    deviation_deg: float
    new_vdi: bool


def view_deviation_deg(cam_a: Camera, cam_b: Camera) -> float:
    d = float(np.clip(np.dot(cam_a.view_dir(), cam_b.view_dir()), -1.0, 1.0))
    return math.degrees(math.acos(d))


class RenderClient:
    """Pulls poses from a mailbox, renders the buffered VDI, emits frames."""

    def __init__(self, conn, viewport=(256, 256), target_fps: float = 30.0,
                 d_r: float = 1.0, n_sg: int = 12,
                 frame_cb=None, use_ess: bool = True):
        self.conn = conn
        self.viewport = tuple(viewport)
        self.target_fps = target_fps
        self.d_r = d_r
        self.n_sg = n_sg
        self.frame_cb = frame_cb
        self.opts = RenderOptions(use_ess=use_ess)
        self.buffers = DoubleBuffer()
        self.stop = threading.Event()
        self.pi = PiController()
        self._pose_lock = threading.Lock()
        self._pose: Camera | None = None
        self._pose_seq = 0
        self._sent_seq = 0
        self._slow_frames = 0
        self._preview = False
        self._last_swap = self.buffers.swaps
        self._swap_time = time.perf_counter()
        self._threads: list[threading.Thread] = []

    # -- pose intake --

    def set_pose(self, cam: Camera) -> None:
        """Latest-wins pose update from the UI or a script."""
        with self._pose_lock:
            self._pose = cam
            self._pose_seq += 1

    def _current_pose(self) -> tuple[Camera | None, int]:
        with self._pose_lock:
            return self._pose, self._pose_seq

    # -- stages --

    def _receiver(self) -> None:
        client_recv_and_swap(self.conn, self.buffers, stop=self.stop)

    def _pose_sender(self) -> None:
        while not self.stop.is_set():
            pose, seq = self._current_pose()
            if pose is not None and seq > self._sent_seq:
                try:
                    send_pose(self.conn, seq, pose)
                except OSError:
                    return
                self._sent_seq = seq
            time.sleep(0.002)

    def render_frame(self) -> tuple[Image, Hud] | None:
        """Render one frame from the buffered VDI at the current pose."""
        entry = self.buffers.front
        pose, _ = self._current_pose()
        if entry is None or pose is None:
            return None
        vdi, grid, pkt = entry
        new_vdi = self.buffers.swaps != self._last_swap
        if new_vdi:
            self._last_swap = self.buffers.swaps
            self._swap_time = time.perf_counter()
            self._preview = False      # full quality resumes on swap
            self._slow_frames = 0

        t0 = time.perf_counter()
        if self._preview:
            params = PreviewParams(d_i=self.pi.d_i, d_r=self.d_r,
                                   target_fps=self.target_fps,
                                   display=self.viewport)
            img = render_preview(vdi, grid, pose, params)
        else:
            img = render_vdi(vdi, grid, pose, self.opts)
        frame_ms = (time.perf_counter() - t0) * 1000.0

        if self._preview:
            self.pi.update(frame_ms, self.target_fps)
        elif frame_ms > 1000.0 / self.target_fps:
            self._slow_frames += 1
            if self._slow_frames >= 5:
                self._preview = True
        else:
            self._slow_frames = 0

        hud = Hud(fps=1000.0 / max(frame_ms, 1e-6),
                  mode=MODE_PREVIEW if self._preview else MODE_FULL,
                  vdi_age_ms=(time.perf_counter() - self._swap_time) * 1000.0,
                  deviation_deg=view_deviation_deg(pose, vdi.gen_camera),
                  new_vdi=new_vdi)
        if self.frame_cb is not None:
            self.frame_cb(img, hud)
        return img, hud

    def _render_loop(self) -> None:
        last_seq = -1
        last_swaps = -1
        while not self.stop.is_set():
            _, seq = self._current_pose()
            if seq == last_seq and self.buffers.swaps == last_swaps:
                time.sleep(0.002)
                continue
            last_seq = seq
            last_swaps = self.buffers.swaps
            self.render_frame()

    # -- lifecycle --

    def start(self) -> None:
        send_control(self.conn, {"viewport": list(self.viewport),
                                 "n_sg": self.n_sg})
        for target in (self._receiver, self._pose_sender, self._render_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def shutdown(self) -> None:
        self.stop.set()
        try:
            self.conn.close()
        except OSError:
            pass
        for t in self._threads:
            t.join(timeout=1.0)


def run_headless(conn, cameras: list[Camera], out_dir: str,
                 viewport=(256, 256), n_sg: int = 12,
                 settle_s: float = 2.0) -> list[str]:
    """Replay a camera path, writing one PNG per pose; returns written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    client = RenderClient(conn, viewport=viewport, n_sg=n_sg)
    send_control(client.conn, {"viewport": list(viewport), "n_sg": n_sg})
    recv = threading.Thread(target=client._receiver, daemon=True)
    recv.start()
    try:
        for i, cam in enumerate(cameras):
            client.set_pose(cam)
            send_pose(conn, i + 1, cam)
            deadline = time.perf_counter() + settle_s
            while client.buffers.swaps <= i and time.perf_counter() < deadline:
                time.sleep(0.01)
            frame = client.render_frame()
            if frame is None:
                continue
            img, _ = frame
            path = os.path.join(out_dir, f"frame_{i:04d}.png")
            img.save_png(path)
            written.append(path)
    finally:
        client.stop.set()
        try:
            conn.close()
        except OSError:
            pass
    return written
