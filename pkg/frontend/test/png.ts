/** Minimal PNG codec (8-bit RGBA, filter 0) for exercising the frame path. */

import { deflateSync, inflateSync } from 'node:zlib'
import type { DecodedImage } from '../src/viewer'

const SIGNATURE = Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])

const CRC_TABLE = (() => {
  const table = new Uint32Array(256)
  for (let n = 0; n < 256; n++) {
    let c = n
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
    table[n] = c >>> 0
  }
  return table
})()

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff
  for (const b of bytes) c = CRC_TABLE[(c ^ b) & 0xff] ^ (c >>> 8)
  return (c ^ 0xffffffff) >>> 0
}

function chunk(type: string, body: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + body.length)
  const view = new DataView(out.buffer)
  view.setUint32(0, body.length)
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i)
  out.set(body, 8)
  view.setUint32(8 + body.length, crc32(out.subarray(4, 8 + body.length)))
  return out
}

export function encodePng(image: DecodedImage): Uint8Array {
  const { width, height, data } = image
  const ihdr = new Uint8Array(13)
  const iv = new DataView(ihdr.buffer)
  iv.setUint32(0, width)
  iv.setUint32(4, height)
  ihdr[8] = 8 // bit depth
  ihdr[9] = 6 // RGBA
  const raw = new Uint8Array(height * (1 + width * 4))
  for (let y = 0; y < height; y++) {
    raw.set(data.subarray(y * width * 4, (y + 1) * width * 4), y * (1 + width * 4) + 1)
  }
  const idat = new Uint8Array(deflateSync(raw))
  const parts = [SIGNATURE, chunk('IHDR', ihdr), chunk('IDAT', idat), chunk('IEND', new Uint8Array(0))]
  const total = parts.reduce((n, p) => n + p.length, 0)
  const out = new Uint8Array(total)
  let off = 0
  for (const p of parts) {
    out.set(p, off)
    off += p.length
  }
  return out
}

export function decodePng(png: Uint8Array): DecodedImage {
  for (let i = 0; i < 8; i++) {
    if (png[i] !== SIGNATURE[i]) throw new Error('bad png signature')
  }
  const view = new DataView(png.buffer, png.byteOffset)
  let off = 8
  let width = 0
  let height = 0
  const idat: Uint8Array[] = []
  while (off < png.length) {
    const len = view.getUint32(off)
    const type = String.fromCharCode(png[off + 4], png[off + 5], png[off + 6], png[off + 7])
    const body = png.subarray(off + 8, off + 8 + len)
    if (type === 'IHDR') {
      const hv = new DataView(body.buffer, body.byteOffset)
      width = hv.getUint32(0)
      height = hv.getUint32(4)
      if (body[8] !== 8 || body[9] !== 6) throw new Error('only 8-bit RGBA supported')
    } else if (type === 'IDAT') {
      idat.push(body)
    } else if (type === 'IEND') {
      break
    }
    off += 12 + len
  }
  const zipped = new Uint8Array(idat.reduce((n, p) => n + p.length, 0))
  let zo = 0
  for (const p of idat) {
    zipped.set(p, zo)
    zo += p.length
  }
  const raw = new Uint8Array(inflateSync(zipped))
  const stride = 1 + width * 4
  const data = new Uint8Array(width * height * 4)
  let prev = new Uint8Array(width * 4)
  for (let y = 0; y < height; y++) {
    const filter = raw[y * stride]
    const line = raw.subarray(y * stride + 1, (y + 1) * stride)
    const out = data.subarray(y * width * 4, (y + 1) * width * 4)
    switch (filter) {
      case 0:
        out.set(line)
        break
      case 1:
        for (let i = 0; i < line.length; i++) {
          out[i] = (line[i] + (i >= 4 ? out[i - 4] : 0)) & 0xff
        }
        break
      case 2:
        for (let i = 0; i < line.length; i++) out[i] = (line[i] + prev[i]) & 0xff
        break
      case 3:
        for (let i = 0; i < line.length; i++) {
          out[i] = (line[i] + (((i >= 4 ? out[i - 4] : 0) + prev[i]) >> 1)) & 0xff
        }
        break
      case 4:
        for (let i = 0; i < line.length; i++) {
          const a = i >= 4 ? out[i - 4] : 0
          const b = prev[i]
          const c = i >= 4 ? prev[i - 4] : 0
          const p = a + b - c
          const pa = Math.abs(p - a)
          const pb = Math.abs(p - b)
          const pc = Math.abs(p - c)
          const pred = pa <= pb && pa <= pc ? a : pb <= pc ? b : c
          out[i] = (line[i] + pred) & 0xff
        }
        break
      default:
        throw new Error(`unsupported filter ${filter}`)
    }
    prev = out
  }
  return { width, height, data }
}
