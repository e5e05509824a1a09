/**
 * Orbit camera state: azimuth/elevation/radius about the dataset center,
 * with the camera always facing the center.
 */

export interface OrbitState {
  azimuthDeg: number
  elevationDeg: number
  radius: number
}

export interface Pose {
  position: [number, number, number]
  orientation: [number, number, number, number] // (qx, qy, qz, qw), camera-to-world
}

const ELEVATION_LIMIT = 89.999 // open interval (-90, 90)
const MIN_RADIUS = 1e-6

export function clampOrbit(state: OrbitState): OrbitState {
  return {
    azimuthDeg: state.azimuthDeg,
    elevationDeg: Math.max(-ELEVATION_LIMIT, Math.min(ELEVATION_LIMIT, state.elevationDeg)),
    radius: Math.max(MIN_RADIUS, state.radius),
  }
}

export function rotateOrbit(state: OrbitState, dAzimuthDeg: number, dElevationDeg: number): OrbitState {
  return clampOrbit({
    azimuthDeg: state.azimuthDeg + dAzimuthDeg,
    elevationDeg: state.elevationDeg + dElevationDeg,
    radius: state.radius,
  })
}

export function zoomOrbit(state: OrbitState, factor: number): OrbitState {
  return clampOrbit({ ...state, radius: state.radius * factor })
}

type Vec3 = [number, number, number]

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2])
  return [v[0] / n, v[1] / n, v[2] / n]
}

/** Quaternion (x, y, z, w) of a rotation matrix given by its columns. */
function columnsToQuat(c0: Vec3, c1: Vec3, c2: Vec3): [number, number, number, number] {
  // rows of the matrix whose columns are c0, c1, c2
  const m = [
    [c0[0], c1[0], c2[0]],
    [c0[1], c1[1], c2[1]],
    [c0[2], c1[2], c2[2]],
  ]
  const t = m[0][0] + m[1][1] + m[2][2]
  let x: number, y: number, z: number, w: number
  if (t > 0) {
    const s = Math.sqrt(t + 1) * 2
    w = 0.25 * s
    x = (m[2][1] - m[1][2]) / s
    y = (m[0][2] - m[2][0]) / s
    z = (m[1][0] - m[0][1]) / s
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const s = Math.sqrt(1 + m[0][0] - m[1][1] - m[2][2]) * 2
    w = (m[2][1] - m[1][2]) / s
    x = 0.25 * s
    y = (m[0][1] + m[1][0]) / s
    z = (m[0][2] + m[2][0]) / s
  } else if (m[1][1] > m[2][2]) {
    const s = Math.sqrt(1 + m[1][1] - m[0][0] - m[2][2]) * 2
    w = (m[0][2] - m[2][0]) / s
    x = (m[0][1] + m[1][0]) / s
    y = 0.25 * s
    z = (m[1][2] + m[2][1]) / s
  } else {
    const s = Math.sqrt(1 + m[2][2] - m[0][0] - m[1][1]) * 2
    w = (m[1][0] - m[0][1]) / s
    x = (m[0][2] + m[2][0]) / s
    y = (m[1][2] + m[2][1]) / s
    z = 0.25 * s
  }
  return [x, y, z, w]
}

/** World position on the orbit sphere plus a look-at-center orientation. */
export function orbitToPose(state: OrbitState, center: Vec3): Pose {
  const s = clampOrbit(state)
  const az = (s.azimuthDeg * Math.PI) / 180
  const el = (s.elevationDeg * Math.PI) / 180
  const position: Vec3 = [
    center[0] + s.radius * Math.cos(el) * Math.sin(az),
    center[1] + s.radius * Math.sin(el),
    center[2] + s.radius * Math.cos(el) * Math.cos(az),
  ]
  const forward = normalize(sub(center, position))
  const right = normalize(cross(forward, [0, 1, 0]))
  const up = cross(right, forward)
  // camera looks down its local -z axis
  const back: Vec3 = [-forward[0], -forward[1], -forward[2]]
  return { position, orientation: columnsToQuat(right, up, back) }
}

/** Unit vector from the camera position along its viewing direction. */
export function viewDir(pose: Pose): Vec3 {
  const [x, y, z, w] = pose.orientation
  // third column of the rotation matrix, negated
  return [-(2 * (x * z + y * w)), -(2 * (y * z - x * w)), -(1 - 2 * (x * x + y * y))]
}
