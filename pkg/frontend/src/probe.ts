import type { ProbeBody } from './api.js'

// Measurement-circle widget state. The height slider translates the
// probe center along the model's vertical axis; the two tilt angles
// rotate the probe normal away from vertical. serialize() produces
// exactly the POST /models/{id}/measure body.

export const RAY_COUNT_CHOICES = [100, 1000, 10000] as const
export type RayCount = (typeof RAY_COUNT_CHOICES)[number]

export interface ProbeState {
  heightCm: number
  tiltXDeg: number
  tiltYDeg: number
  offsetX: number
  offsetY: number
  radius: number | 'auto'
  rayCount: RayCount
}

export const DEFAULT_PROBE: ProbeState = {
  heightCm: 0,
  tiltXDeg: 0,
  tiltYDeg: 0,
  offsetX: 0,
  offsetY: 0,
  radius: 'auto',
  rayCount: 10000,
}

const DEG = Math.PI / 180

/** Probe normal: vertical +z tilted by the two angle controls. */
export function probeNormal(s: ProbeState): [number, number, number] {
  const ax = s.tiltXDeg * DEG
  const ay = s.tiltYDeg * DEG
  // rotate +z about x by ax, then about y by ay
  const n: [number, number, number] = [
    Math.cos(ax) * Math.sin(ay),
    -Math.sin(ax),
    Math.cos(ax) * Math.cos(ay),
  ]
  const len = Math.hypot(...n)
  // + 0 folds the -0 that -sin(0) produces into plain 0
  return [n[0] / len + 0, n[1] / len + 0, n[2] / len + 0]
}

export function serialize(s: ProbeState): ProbeBody {
  validate(s)
  return {
    center: [s.offsetX, s.offsetY, s.heightCm],
    normal: probeNormal(s),
    radius: s.radius,
    rays: s.rayCount,
  }
}

/** Inverse of serialize for round-tripping widget state. */
export function deserialize(body: ProbeBody): ProbeState {
  const [x, y, z] = body.center
  const [nx, ny, nz] = body.normal
  const ax = Math.asin(-ny)
  const ay = Math.atan2(nx, nz)
  const rays = body.rays ?? 10000
  if (!RAY_COUNT_CHOICES.includes(rays as RayCount)) {
    throw new Error(`ray count ${rays} not offered by the widget`)
  }
  return {
    heightCm: z,
    tiltXDeg: ax / DEG,
    tiltYDeg: ay / DEG,
    offsetX: x,
    offsetY: y,
    radius: body.radius ?? 'auto',
    rayCount: rays as RayCount,
  }
}

export function validate(s: ProbeState): void {
  if (!RAY_COUNT_CHOICES.includes(s.rayCount)) {
    throw new Error(`ray count must be one of ${RAY_COUNT_CHOICES.join(', ')}`)
  }
  if (s.radius !== 'auto' && !(s.radius > 0)) {
    throw new Error('radius must be positive or "auto"')
  }
  if (Math.abs(s.tiltXDeg) > 90 || Math.abs(s.tiltYDeg) > 90) {
    throw new Error('tilt angles limited to +-90 degrees')
  }
}
