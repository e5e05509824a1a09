import { describe, expect, it } from 'vitest'

import { decodeFramePacket, encodePoseMessage, parseHudUpdate } from '../src/protocol'

describe('frame packets', () => {
  it('decodes the little-endian header and payload', () => {
    const png = Uint8Array.from([1, 2, 3, 4, 5])
    const buf = new ArrayBuffer(9 + png.length)
    const view = new DataView(buf)
    view.setUint32(0, 320, true)
    view.setUint32(4, 240, true)
    view.setUint8(8, 1)
    new Uint8Array(buf, 9).set(png)
    const packet = decodeFramePacket(buf)
    expect(packet.width).toBe(320)
    expect(packet.height).toBe(240)
    expect(packet.mode).toBe(1)
    expect(Array.from(packet.png)).toEqual([1, 2, 3, 4, 5])
  })

  it('rejects packets shorter than the header', () => {
    expect(() => decodeFramePacket(new ArrayBuffer(5))).toThrow()
  })
})

describe('pose messages', () => {
  it('serializes seq, position, and orientation', () => {
    const msg = JSON.parse(
      encodePoseMessage(12, { position: [1, 2, 3], orientation: [0, 0, 0, 1] }),
    )
    expect(msg).toEqual({ seq: 12, position: [1, 2, 3], orientation: [0, 0, 0, 1] })
  })
})

describe('hud updates', () => {
  it('parses a well-formed update', () => {
    const hud = parseHudUpdate(
      '{"fps": 24.5, "mode": "preview", "vdi_age_ms": 120, "deviation_deg": 8.5, "new_vdi": true}',
    )
    expect(hud).toEqual({ fps: 24.5, mode: 'preview', vdi_age_ms: 120, deviation_deg: 8.5, new_vdi: true })
  })

  it('returns null for garbage', () => {
    expect(parseHudUpdate('not json')).toBeNull()
    expect(parseHudUpdate('{"fps": "fast"}')).toBeNull()
    expect(parseHudUpdate('{"fps": 30, "mode": "turbo"}')).toBeNull()
  })
})
