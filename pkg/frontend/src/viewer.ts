/**
 * Viewer core: owns the orbit state, streams poses to the rendering client,
 * and displays the frames and HUD updates the client sends back.
 *
 * The socket, image decoder, and presenter are injected so the loop can run
 * both in the browser (WebSocket + createImageBitmap + canvas) and under test
 * (in-memory socket + raw decoder).
 */

import { PoseCoalescer, backoffDelayMs, type Clock } from './coalesce'
import { clampOrbit, orbitToPose, rotateOrbit, zoomOrbit, type OrbitState } from './orbit'
import {
  decodeFramePacket,
  encodePoseMessage,
  parseHudUpdate,
  type FramePacket,
  type HudUpdate,
} from './protocol'

export interface ViewerSocket {
  send(data: string): void
  close(): void
  onopen: (() => void) | null
  onclose: (() => void) | null
  onmessage: ((data: ArrayBuffer | string) => void) | null
}

export interface DecodedImage {
  width: number
  height: number
  /** RGBA8, row-major from the top-left. */
  data: Uint8Array
}

export interface ViewerConfig {
  connect: () => ViewerSocket
  decodeImage: (png: Uint8Array) => Promise<DecodedImage>
  present: (image: DecodedImage, mode: number) => void
  onHud?: (hud: HudUpdate) => void
  center: [number, number, number]
  initialOrbit: OrbitState
  maxPoseHz?: number
  now?: Clock
  schedule?: (fn: () => void, delayMs: number) => void
}

export interface ViewerState {
  orbit: OrbitState
  hud: HudUpdate | null
  lastFrame: DecodedImage | null
  connected: boolean
  posesSent: number
  framesShown: number
  framesDropped: number
}

export class ViewerApp {
  readonly state: ViewerState
  private socket: ViewerSocket | null = null
  private seq = 0
  private reconnectAttempt = 0
  private stopped = false
  private decoding = false
  private pendingFrame: FramePacket | null = null
  private readonly coalescer: PoseCoalescer<string>
  private readonly schedule: (fn: () => void, delayMs: number) => void

  constructor(private readonly config: ViewerConfig) {
    this.state = {
      orbit: clampOrbit(config.initialOrbit),
      hud: null,
      lastFrame: null,
      connected: false,
      posesSent: 0,
      framesShown: 0,
      framesDropped: 0,
    }
    const now = config.now ?? (() => performance.now())
    this.schedule = config.schedule ?? ((fn, d) => void setTimeout(fn, d))
    this.coalescer = new PoseCoalescer<string>(
      (msg) => this.sendRaw(msg),
      1000 / (config.maxPoseHz ?? 60),
      now,
      this.schedule,
    )
  }

  // -- connection --

  start(): void {
    this.stopped = false
    this.openSocket()
  }

  stop(): void {
    this.stopped = true
    this.socket?.close()
    this.socket = null
    this.state.connected = false
  }

  private openSocket(): void {
    const sock = this.config.connect()
    this.socket = sock
    sock.onopen = () => {
      this.state.connected = true
      this.reconnectAttempt = 0
      this.pushPose() // announce the current orbit on every (re)connect
    }
    sock.onclose = () => {
      this.state.connected = false
      if (this.stopped) return
      const delay = backoffDelayMs(this.reconnectAttempt++)
      this.schedule(() => {
        if (!this.stopped) this.openSocket()
      }, delay)
    }
    sock.onmessage = (data) => {
      if (typeof data === 'string') this.handleHud(data)
      else this.handleFrame(data)
    }
  }

  private sendRaw(msg: string): void {
    if (this.socket === null || !this.state.connected) return
    this.socket.send(msg)
    this.state.posesSent += 1
  }

  // -- input --

  drag(dAzimuthDeg: number, dElevationDeg: number): void {
    this.state.orbit = rotateOrbit(this.state.orbit, dAzimuthDeg, dElevationDeg)
    this.pushPose()
  }

  zoom(factor: number): void {
    this.state.orbit = zoomOrbit(this.state.orbit, factor)
    this.pushPose()
  }

  private pushPose(): void {
    const pose = orbitToPose(this.state.orbit, this.config.center)
    this.seq += 1
    this.coalescer.push(encodePoseMessage(this.seq, pose))
  }

  // -- client -> browser --

  private handleHud(text: string): void {
    const hud = parseHudUpdate(text)
    if (hud === null) return
    this.state.hud = hud
    this.config.onHud?.(hud)
  }

  private handleFrame(buf: ArrayBuffer): void {
    let packet: FramePacket
    try {
      packet = decodeFramePacket(buf)
    } catch {
      return
    }
    if (this.decoding) {
      // stale frame policy: a newer frame replaces the one still waiting
      if (this.pendingFrame !== null) this.state.framesDropped += 1
      this.pendingFrame = packet
      return
    }
    void this.decodeAndPresent(packet)
  }

  private async decodeAndPresent(packet: FramePacket): Promise<void> {
    this.decoding = true
    try {
      const image = await this.config.decodeImage(packet.png)
      this.state.lastFrame = image
      this.state.framesShown += 1
      this.config.present(image, packet.mode)
    } catch {
      // undecodable frame: keep showing the previous one
    } finally {
      this.decoding = false
      const next = this.pendingFrame
      this.pendingFrame = null
      if (next !== null) void this.decodeAndPresent(next)
    }
  }
}
