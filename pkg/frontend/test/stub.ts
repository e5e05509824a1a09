/** In-memory socket + scripted rendering client for exercising the viewer loop. */

import type { DecodedImage, ViewerSocket } from '../src/viewer'
import type { Pose } from '../src/orbit'
import { encodePng } from './png'

export class StubSocket implements ViewerSocket {
  onopen: (() => void) | null = null
  onclose: (() => void) | null = null
  onmessage: ((data: ArrayBuffer | string) => void) | null = null
  sent: string[] = []
  closed = false

  constructor(private readonly onSend?: (data: string) => void) {}

  send(data: string): void {
    this.sent.push(data)
    this.onSend?.(data)
  }

  close(): void {
    this.closed = true
    this.onclose?.()
  }

  open(): void {
    this.onopen?.()
  }

  deliver(data: ArrayBuffer | string): void {
    this.onmessage?.(data)
  }
}

export function frameBytes(image: DecodedImage, mode: number): ArrayBuffer {
  const png = encodePng(image)
  const out = new ArrayBuffer(9 + png.length)
  const view = new DataView(out)
  view.setUint32(0, image.width, true)
  view.setUint32(4, image.height, true)
  view.setUint8(8, mode)
  new Uint8Array(out, 9).set(png)
  return out
}

/** Deterministic 32x32 frame derived from the pose: a gradient keyed by the
 * camera orientation, so equal poses give byte-identical frames. */
export function renderStubFrame(pose: Pose): DecodedImage {
  const size = 32
  const data = new Uint8Array(size * size * 4)
  // quantize so poses equal up to float noise produce byte-identical frames
  const quant = (v: number) => Math.round(v * 512) / 512
  const [qx, qy, qz, qw] = pose.orientation.map(quant)
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (y * size + x) * 4
      data[i] = Math.round(((qx + 1) / 2) * 255) ^ (x * 7 % 256)
      data[i + 1] = Math.round(((qy + 1) / 2) * 255) ^ (y * 11 % 256)
      data[i + 2] = Math.round(((Math.abs(qz) + Math.abs(qw)) / 2) * 255)
      data[i + 3] = 255
    }
  }
  return { width: size, height: size, data }
}

export interface StubClientOptions {
  /** Frames whose index is in this set report preview mode. */
  previewFrames?: Set<number>
}

/** Plays the rendering client's side of the bridge protocol. */
export class StubClient {
  readonly socket: StubSocket
  readonly receivedSeqs: number[] = []
  readonly sentModes: ('full' | 'preview')[] = []
  private frameIndex = 0

  constructor(private readonly options: StubClientOptions = {}) {
    this.socket = new StubSocket((data) => this.onPose(data))
  }

  private onPose(data: string): void {
    const msg = JSON.parse(data) as { seq: number } & Pose
    this.receivedSeqs.push(msg.seq)
    const preview = this.options.previewFrames?.has(this.frameIndex) ?? false
    const mode = preview ? 1 : 0
    const image = renderStubFrame(msg)
    this.socket.deliver(frameBytes(image, mode))
    const modeName = preview ? 'preview' : 'full'
    this.sentModes.push(modeName)
    this.socket.deliver(
      JSON.stringify({
        fps: 30,
        mode: modeName,
        vdi_age_ms: 10,
        deviation_deg: 0,
        new_vdi: this.frameIndex === 0,
      }),
    )
    this.frameIndex += 1
  }
}

export async function settle(): Promise<void> {
  // let queued promise callbacks (frame decode) run
  for (let i = 0; i < 10; i++) await Promise.resolve()
}
