/**
 * Browser bootstrap: canvas + mouse controls + HUD readout wired to the
 * rendering client's `/viewer` websocket endpoint.
 *
 * Dataset framing comes from query parameters (all optional):
 *   ?cx=&cy=&cz=   dataset center (default 64, 64, 64)
 *   ?radius=       initial orbit radius (default 180)
 */

import { ViewerApp, type DecodedImage, type ViewerSocket } from './viewer'
import { MODE_PREVIEW, type HudUpdate } from './protocol'

function param(name: string, fallback: number): number {
  const raw = new URLSearchParams(window.location.search).get(name)
  const value = raw === null ? NaN : Number(raw)
  return Number.isFinite(value) ? value : fallback
}

function connectWebSocket(): ViewerSocket {
  const url = `ws://${window.location.host}/viewer`
  const ws = new WebSocket(url)
  ws.binaryType = 'arraybuffer'
  const wrapper: ViewerSocket = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onopen: null,
    onclose: null,
    onmessage: null,
  }
  ws.onopen = () => wrapper.onopen?.()
  ws.onclose = () => wrapper.onclose?.()
  ws.onerror = () => ws.close()
  ws.onmessage = (ev) => wrapper.onmessage?.(ev.data)
  return wrapper
}

async function decodePng(png: Uint8Array): Promise<DecodedImage> {
  const bitmap = await createImageBitmap(new Blob([png.buffer as ArrayBuffer], { type: 'image/png' }))
  const off = document.createElement('canvas')
  off.width = bitmap.width
  off.height = bitmap.height
  const ctx = off.getContext('2d')!
  ctx.drawImage(bitmap, 0, 0)
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height)
  return { width: bitmap.width, height: bitmap.height, data: new Uint8Array(data.data.buffer) }
}

function setup(): void {
  const canvas = document.getElementById('view') as HTMLCanvasElement
  const hudEl = document.getElementById('hud') as HTMLElement
  const ctx = canvas.getContext('2d')!

  const present = (image: DecodedImage, mode: number): void => {
    canvas.width = image.width
    canvas.height = image.height
    const pixels = new ImageData(new Uint8ClampedArray(image.data), image.width, image.height)
    ctx.putImageData(pixels, 0, 0)
    canvas.style.outline = mode === MODE_PREVIEW ? '2px solid #c90' : 'none'
  }

  const onHud = (hud: HudUpdate): void => {
    hudEl.textContent =
      `${hud.fps.toFixed(1)} fps | ${hud.mode}` +
      ` | vdi age ${hud.vdi_age_ms.toFixed(0)} ms` +
      ` | deviation ${hud.deviation_deg.toFixed(1)}°` +
      (hud.new_vdi ? ' | new VDI' : '')
  }

  const app = new ViewerApp({
    connect: connectWebSocket,
    decodeImage: decodePng,
    present,
    onHud,
    center: [param('cx', 64), param('cy', 64), param('cz', 64)],
    initialOrbit: { azimuthDeg: 0, elevationDeg: 0, radius: param('radius', 180) },
  })

  let dragging = false
  let lastX = 0
  let lastY = 0
  canvas.addEventListener('mousedown', (ev) => {
    dragging = true
    lastX = ev.clientX
    lastY = ev.clientY
  })
  window.addEventListener('mouseup', () => {
    dragging = false
  })
  window.addEventListener('mousemove', (ev) => {
    if (!dragging) return
    const dx = ev.clientX - lastX
    const dy = ev.clientY - lastY
    lastX = ev.clientX
    lastY = ev.clientY
    app.drag(-dx * 0.4, dy * 0.4)
  })
  canvas.addEventListener('wheel', (ev) => {
    ev.preventDefault()
    app.zoom(ev.deltaY > 0 ? 1.1 : 1 / 1.1)
  })

  app.start()
}

setup()
