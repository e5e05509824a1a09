"""Browser bridge: websocket endpoint `/viewer` plus the static page at `/`.

Browser to client: JSON poses {seq, position, orientation}, coalesced latest
wins, at most 60 Hz. Client to browser: binary frames (u32 width, u32 height,
u8 mode, PNG bytes, little endian) and JSON HUD updates {fps, mode,
vdi_age_ms, deviation_deg, new_vdi}.
"""

from __future__ import annotations

import asyncio
import json
import os
import struct
import threading
from http import HTTPStatus

import websockets

from .camera import Camera
from .client import MODE_PREVIEW, Hud, RenderClient
from .image import Image

_FRAME_HDR = struct.Struct("<IIB")

_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>vdikit viewer</title></head>
<body style="background:#111;color:#ddd;font-family:monospace">
<p>Viewer frontend bundle not found. Build it with:</p>
<pre>cd frontend &amp;&amp; npm install &amp;&amp; npm run build</pre>
</body></html>
"""


def encode_browser_frame(img: Image, mode: int) -> bytes:
    png = img.png_bytes()
    return _FRAME_HDR.pack(img.width, img.height, mode) + png


def _static_dir() -> str:
    here = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    return os.path.join(here, "frontend", "dist")


def load_page() -> str:
    path = os.path.join(_static_dir(), "index.html")
    if os.path.isfile(path):
        with open(path) as f:
            return f.read()
    return _FALLBACK_PAGE


class ViewerBridge:
    """Fans HUD/frame events from a RenderClient out to browser sockets and
    feeds coalesced browser poses back into it."""

    def __init__(self, client: RenderClient, base_camera: Camera,
                 host: str = "127.0.0.1", port: int = 8800,
                 max_pose_hz: float = 60.0):
        self.client = client
        self.base_camera = base_camera
        self.host = host
        self.port = port
        self.min_pose_interval = 1.0 / max_pose_hz
        self.loop: asyncio.AbstractEventLoop | None = None
        self._sockets: set = set()
        self._last_pose_time = 0.0
        self._thread: threading.Thread | None = None
        self._started = threading.Event()
        client.frame_cb = self._on_frame

    # -- client -> browser --

    def _on_frame(self, img: Image, hud: Hud) -> None:
        if self.loop is None:
            return
        frame = encode_browser_frame(
            img, MODE_PREVIEW if hud.mode == MODE_PREVIEW else 0)
        hud_msg = json.dumps({
            "fps": round(hud.fps, 2),
            "mode": "preview" if hud.mode == MODE_PREVIEW else "full",
            "vdi_age_ms": round(hud.vdi_age_ms, 1),
            "deviation_deg": round(hud.deviation_deg, 2),
            "new_vdi": hud.new_vdi,
        })
        asyncio.run_coroutine_threadsafe(self._broadcast(frame, hud_msg),
                                         self.loop)

    async def _broadcast(self, frame: bytes, hud_msg: str) -> None:
        dead = []
        for ws in self._sockets:
            try:
                await ws.send(frame)
                await ws.send(hud_msg)
            except websockets.ConnectionClosed:
                dead.append(ws)
        for ws in dead:
            self._sockets.discard(ws)

    # -- browser -> client --

    def _apply_pose(self, msg: dict) -> None:
        base = self.base_camera
        cam = Camera(position=tuple(float(v) for v in msg["position"]),
                     orientation=tuple(float(v) for v in msg["orientation"]),
                     fov_y=base.fov_y, near=base.near, far=base.far,
                     viewport=self.client.viewport)
        self.client.set_pose(cam)

    async def _handler(self, ws) -> None:
        self._sockets.add(ws)
        pending: dict | None = None
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except (ValueError, TypeError):
                    continue
                loop_time = asyncio.get_event_loop().time()
                if loop_time - self._last_pose_time < self.min_pose_interval:
                    pending = msg   # coalesce: newest replaces queued
                    continue
                self._last_pose_time = loop_time
                self._apply_pose(pending or msg)
                pending = None
        finally:
            self._sockets.discard(ws)

    # -- http --

    def _process_request(self, connection, request):
        if request.path == "/viewer":
            return None  # continue with the websocket handshake
        if request.path == "/":
            resp = connection.respond(HTTPStatus.OK, load_page())
            resp.headers["Content-Type"] = "text/html; charset=utf-8"
            return resp
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")

    # -- lifecycle --

    async def _main(self) -> None:
        async with websockets.serve(self._handler, self.host, self.port,
                                    process_request=self._process_request):
            self._started.set()
            while not self.client.stop.is_set():
                await asyncio.sleep(0.1)

    def _run(self) -> None:
        self.loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self.loop)
        try:
            self.loop.run_until_complete(self._main())
        finally:
            self.loop.close()

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        self._started.wait(timeout=5.0)

    def shutdown(self) -> None:
        self.client.stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
