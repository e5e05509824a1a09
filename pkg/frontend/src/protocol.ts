/**
 * Bridge wire format.
 *
 * Browser -> client: JSON text messages { seq, position, orientation }.
 * Client -> browser: binary frames (u32 width, u32 height, u8 mode, PNG
 * bytes, little endian) interleaved with JSON HUD updates
 * { fps, mode, vdi_age_ms, deviation_deg, new_vdi }.
 */

import type { Pose } from './orbit'

export const MODE_FULL = 0
export const MODE_PREVIEW = 1

export interface PoseMessage extends Pose {
  seq: number
}

export interface FramePacket {
  width: number
  height: number
  mode: number
  png: Uint8Array
}

export interface HudUpdate {
  fps: number
  mode: 'full' | 'preview'
  vdi_age_ms: number
  deviation_deg: number
  new_vdi: boolean
}

const FRAME_HEADER_BYTES = 9

export function encodePoseMessage(seq: number, pose: Pose): string {
  return JSON.stringify({ seq, position: pose.position, orientation: pose.orientation })
}

export function decodeFramePacket(buf: ArrayBuffer): FramePacket {
  if (buf.byteLength < FRAME_HEADER_BYTES) {
    throw new Error(`frame packet too short: ${buf.byteLength} bytes`)
  }
  const view = new DataView(buf)
  return {
    width: view.getUint32(0, true),
    height: view.getUint32(4, true),
    mode: view.getUint8(8),
    png: new Uint8Array(buf, FRAME_HEADER_BYTES),
  }
}

export function parseHudUpdate(text: string): HudUpdate | null {
  let obj: unknown
  try {
    obj = JSON.parse(text)
  } catch {
    return null
  }
  if (typeof obj !== 'object' || obj === null) return null
  const o = obj as Record<string, unknown>
  if (typeof o.fps !== 'number' || (o.mode !== 'full' && o.mode !== 'preview')) {
    return null
  }
  return {
    fps: o.fps,
    mode: o.mode,
    vdi_age_ms: typeof o.vdi_age_ms === 'number' ? o.vdi_age_ms : 0,
    deviation_deg: typeof o.deviation_deg === 'number' ? o.deviation_deg : 0,
    new_vdi: o.new_vdi === true,
  }
}
