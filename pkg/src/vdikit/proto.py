"""Remote-rendering transport: camera poses upstream, compressed VDIs downstream.

Wire format: length-prefixed frames over a duplex byte stream (TCP), little
endian. Each frame is u32 payload length (type byte included), u8 type
(1 = pose, 2 = vdi, 3 = control JSON), then the payload. VDI payloads carry an
LZ4 block plus the uncompressed length so transport is provably lossless.

Server: pose intake is a latest-wins mailbox; generation and compress/send run
as two pipelined stages joined by a single-slot (drop-oldest) handoff.
Client: a reader thread decodes packets off the render path and publishes
complete VDIs through an atomically swapped double buffer.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from . import lz4
from .camera import Camera
from .vdi import AccelGrid, Vdi, decode_vdi

FRAME_POSE = 1
FRAME_VDI = 2
FRAME_CONTROL = 3

_LEN = struct.Struct("<I")
_POSE = struct.Struct("<Q10dd")      # seq, pose block (pos3 quat4 fov near far), timestamp_ms
_VDI_HDR = struct.Struct("<QQQ")     # seq, gen_pose_seq, uncompressed_len


class TruncatedFrame(ValueError):
    pass


class UnknownType(ValueError):
    pass


DecompressFailure = lz4.DecompressFailure


@dataclass(frozen=True)
class PoseMsg:
    seq: int
    camera_block: tuple        # (px, py, pz, qx, qy, qz, qw, fov_y, near, far)
    timestamp_ms: float

    def camera(self, viewport) -> Camera:
        b = self.camera_block
        return Camera(position=tuple(b[0:3]), orientation=tuple(b[3:7]),
                      fov_y=b[7], near=b[8], far=b[9],
                      viewport=(int(viewport[0]), int(viewport[1])))

    @staticmethod
    def from_camera(seq: int, cam: Camera, timestamp_ms: float | None = None
                    ) -> "PoseMsg":
        if timestamp_ms is None:
            timestamp_ms = time.time() * 1000.0
        block = (*cam.position, *cam.orientation, cam.fov_y, cam.near, cam.far)
        return PoseMsg(seq=seq, camera_block=block, timestamp_ms=timestamp_ms)


@dataclass(frozen=True)
class VdiPacket:
    seq: int
    gen_pose_seq: int
    uncompressed_len: int
    body: bytes               # LZ4 block of the VDI file bytes

    def vdi_bytes(self) -> bytes:
        return lz4.decompress(self.body, self.uncompressed_len)

    def decode(self) -> tuple[Vdi, AccelGrid]:
        return decode_vdi(self.vdi_bytes())

    @staticmethod
    def from_vdi_bytes(seq: int, gen_pose_seq: int, raw: bytes,
                       compress_fn=None) -> "VdiPacket":
        body = (compress_fn or lz4.compress)(raw)
        return VdiPacket(seq=seq, gen_pose_seq=gen_pose_seq,
                         uncompressed_len=len(raw), body=body)


# -- byte-level codecs ---------------------------------------------------------

def encode_pose(msg: PoseMsg) -> bytes:
    return _POSE.pack(msg.seq, *msg.camera_block, msg.timestamp_ms)


def decode_pose(payload: bytes) -> PoseMsg:
    if len(payload) != _POSE.size:
        raise TruncatedFrame(f"pose payload {len(payload)} != {_POSE.size}")
    vals = _POSE.unpack(payload)
    return PoseMsg(seq=vals[0], camera_block=vals[1:11], timestamp_ms=vals[11])


def encode_vdi_packet(pkt: VdiPacket) -> bytes:
    return _VDI_HDR.pack(pkt.seq, pkt.gen_pose_seq, pkt.uncompressed_len) + pkt.body


def decode_vdi_packet(payload: bytes) -> VdiPacket:
    if len(payload) < _VDI_HDR.size:
        raise TruncatedFrame("vdi packet header truncated")
    seq, gseq, ulen = _VDI_HDR.unpack(payload[: _VDI_HDR.size])
    return VdiPacket(seq=seq, gen_pose_seq=gseq, uncompressed_len=ulen,
                     body=payload[_VDI_HDR.size:])


def encode_frame(ftype: int, payload: bytes) -> bytes:
    return _LEN.pack(len(payload) + 1) + bytes([ftype]) + payload


def write_frame(sock, ftype: int, payload: bytes) -> None:
    sock.sendall(encode_frame(ftype, payload))


def _recv_exact(sock, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise TruncatedFrame(f"connection closed, needed {n - got} more bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock) -> tuple[int, bytes]:
    (length,) = _LEN.unpack(_recv_exact(sock, 4))
    if length < 1:
        raise TruncatedFrame("zero-length frame")
    body = _recv_exact(sock, length)
    ftype = body[0]
    if ftype not in (FRAME_POSE, FRAME_VDI, FRAME_CONTROL):
        raise UnknownType(str(ftype))
    return ftype, body[1:]


def send_pose(sock, seq: int, cam: Camera) -> None:
    write_frame(sock, FRAME_POSE, encode_pose(PoseMsg.from_camera(seq, cam)))


def send_control(sock, obj: dict) -> None:
    write_frame(sock, FRAME_CONTROL, json.dumps(obj).encode())


# -- server --------------------------------------------------------------------

class PoseMailbox:
    """Holds only the newest pose; readers block until one newer than last_seq."""

    def __init__(self):
        self._cond = threading.Condition()
        self._msg: PoseMsg | None = None

    def put(self, msg: PoseMsg) -> None:
        with self._cond:
            if self._msg is None or msg.seq >= self._msg.seq:
                self._msg = msg
                self._cond.notify_all()

    def take_newer(self, last_seq: int, stop: threading.Event,
                   timeout: float = 0.05) -> PoseMsg | None:
        with self._cond:
            while not stop.is_set():
                if self._msg is not None and self._msg.seq > last_seq:
                    return self._msg
                self._cond.wait(timeout)
            return None


class _Handoff:
    """Single-slot stage connector; a new item replaces an unconsumed one."""

    def __init__(self):
        self._cond = threading.Condition()
        self._item = None

    def put(self, item) -> None:
        with self._cond:
            self._item = item
            self._cond.notify_all()

    def take(self, stop: threading.Event, timeout: float = 0.05):
        with self._cond:
            while not stop.is_set():
                if self._item is not None:
                    item = self._item
                    self._item = None
                    return item
                self._cond.wait(timeout)
            return None


@dataclass
class ServerStats:
    generations: int = 0
    packets_sent: int = 0


class VdiServer:
    """Generates VDIs for the newest client pose and streams them compressed.

    generate_fn(camera) -> VDI file bytes and compress_fn(bytes) -> bytes are
    injectable so the pipeline can be exercised with stub stages.
    """

    def __init__(self, listener: socket.socket, generate_fn, viewport=(256, 256),
                 compress_fn=None, stats: ServerStats | None = None):
        self.listener = listener
        self.generate_fn = generate_fn
        self.compress_fn = compress_fn or lz4.compress
        self.viewport = tuple(viewport)
        self.stats = stats or ServerStats()
        self.mailbox = PoseMailbox()
        self.stop = threading.Event()
        self._clients: list[socket.socket] = []
        self._clients_lock = threading.Lock()
        self._handoff = _Handoff()
        self._threads: list[threading.Thread] = []

    # -- stages --

    def _reader(self, conn: socket.socket) -> None:
        try:
            while not self.stop.is_set():
                ftype, payload = read_frame(conn)
                if ftype == FRAME_POSE:
                    self.mailbox.put(decode_pose(payload))
                elif ftype == FRAME_CONTROL:
                    ctl = json.loads(payload.decode())
                    if "viewport" in ctl:
                        self.viewport = (int(ctl["viewport"][0]),
                                         int(ctl["viewport"][1]))
        except (TruncatedFrame, OSError):
            pass
        finally:
            with self._clients_lock:
                if conn in self._clients:
                    self._clients.remove(conn)
            conn.close()

    def _acceptor(self) -> None:
        while not self.stop.is_set():
            try:
                conn, _ = self.listener.accept()
            except OSError:
                return
            with self._clients_lock:
                self._clients.append(conn)
            t = threading.Thread(target=self._reader, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _generator(self) -> None:
        last_seq = -1
        last_block = None
        seq = 0
        while not self.stop.is_set():
            msg = self.mailbox.take_newer(last_seq, self.stop)
            if msg is None:
                return
            last_seq = msg.seq
            if msg.camera_block == last_block:
                continue  # identical pose: nothing to regenerate
            cam = msg.camera(self.viewport)
            raw = self.generate_fn(cam)
            last_block = msg.camera_block
            self.stats.generations += 1
            self._handoff.put((seq, msg.seq, raw))
            seq += 1

    def _sender(self) -> None:
        while not self.stop.is_set():
            item = self._handoff.take(self.stop)
            if item is None:
                return
            seq, pose_seq, raw = item
            pkt = VdiPacket.from_vdi_bytes(seq, pose_seq, raw,
                                           compress_fn=self.compress_fn)
            payload = encode_vdi_packet(pkt)
            with self._clients_lock:
                clients = list(self._clients)
            for conn in clients:
                try:
                    write_frame(conn, FRAME_VDI, payload)
                except OSError:
                    with self._clients_lock:
                        if conn in self._clients:
                            self._clients.remove(conn)
            self.stats.packets_sent += 1

    # -- lifecycle --

    def start(self) -> None:
        for target in (self._acceptor, self._generator, self._sender):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def shutdown(self) -> None:
        self.stop.set()
        try:
            self.listener.close()
        except OSError:
            pass
        with self._clients_lock:
            for conn in self._clients:
                try:
                    conn.close()
                except OSError:
                    pass
            self._clients.clear()
        for t in self._threads:
            t.join(timeout=1.0)


def server_loop(volume, tf, params, listener: socket.socket,
                viewport=(256, 256), grid_dims=None,
                stop: threading.Event | None = None) -> None:
    """Blocking service entry point generating real VDIs for incoming poses."""
    from .generate import generate_vdi
    from .vdi import encode_vdi

    def gen(cam: Camera) -> bytes:
        vdi, grid = generate_vdi(volume, tf, cam, params=params,
                                 grid_dims=grid_dims)
        return encode_vdi(vdi, grid)

    server = VdiServer(listener, gen, viewport=viewport)
    if stop is not None:
        server.stop = stop
    server.start()
    try:
        while not server.stop.is_set():
            time.sleep(0.1)
    finally:
        server.shutdown()


# -- client --------------------------------------------------------------------

class DoubleBuffer:
    """Two-slot VDI buffer: the render loop reads `front`, the network stage
    fills the back slot and swaps with a single reference assignment."""

    def __init__(self):
        self._lock = threading.Lock()
        self._front = None     # (Vdi, AccelGrid, VdiPacket)
        self.swaps = 0

    def publish(self, vdi: Vdi, grid: AccelGrid, pkt: VdiPacket) -> None:
        entry = (vdi, grid, pkt)
        with self._lock:
            self._front = entry
            self.swaps += 1

    @property
    def front(self):
        with self._lock:
            return self._front


def client_recv_and_swap(conn: socket.socket, buffers: DoubleBuffer,
                         stop: threading.Event | None = None,
                         on_swap=None) -> int:
    """Receive loop: decompress + decode off the render path, then swap.

    Corrupt packets are dropped and the previous VDI stays published.
    Returns the number of swaps performed.
    """
    swaps = 0
    while stop is None or not stop.is_set():
        try:
            ftype, payload = read_frame(conn)
        except (TruncatedFrame, OSError):
            break
        if ftype != FRAME_VDI:
            continue
        try:
            pkt = decode_vdi_packet(payload)
            vdi, grid = pkt.decode()
        except (ValueError, OSError):
            continue  # keep rendering from the old VDI
        buffers.publish(vdi, grid, pkt)
        swaps += 1
        if on_swap is not None:
            on_swap(pkt)
    return swaps


def make_listener(host: str, port: int) -> socket.socket:
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    s.bind((host, port))
    s.listen()
    return s


def connect(host: str, port: int, timeout: float = 10.0) -> socket.socket:
    return socket.create_connection((host, port), timeout=timeout)
