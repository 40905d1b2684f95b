import { describe, expect, it } from 'vitest'
import {
  DEFAULT_PROBE,
  ProbeState,
  deserialize,
  probeNormal,
  serialize,
} from '../src/probe.js'

describe('probe widget serialization', () => {
  it('produces exactly the POST /measure body', () => {
    const body = serialize(DEFAULT_PROBE)
    expect(body).toEqual({
      center: [0, 0, 0],
      normal: [0, 0, 1],
      radius: 'auto',
      rays: 10000,
    })
    expect(Object.keys(body).sort()).toEqual([
      'center',
      'normal',
      'radius',
      'rays',
    ])
  })

  it('height slider moves the center along the vertical axis', () => {
    const body = serialize({ ...DEFAULT_PROBE, heightCm: 110 })
    expect(body.center).toEqual([0, 0, 110])
    expect(body.normal).toEqual([0, 0, 1])
  })

  it('tilt angles produce a unit normal', () => {
    for (const [tx, ty] of [[30, 0], [0, 45], [-20, 60], [89, -89]]) {
      const n = probeNormal({ ...DEFAULT_PROBE, tiltXDeg: tx, tiltYDeg: ty })
      expect(Math.hypot(...n)).toBeCloseTo(1, 12)
    }
  })

  it('round-trips deserialize(serialize(w)) = w', () => {
    const states: ProbeState[] = [
      DEFAULT_PROBE,
      { ...DEFAULT_PROBE, heightCm: 42.5, tiltXDeg: 15, tiltYDeg: -30 },
      {
        heightCm: 7.5,
        tiltXDeg: -45,
        tiltYDeg: 10,
        offsetX: 1.25,
        offsetY: -3,
        radius: 25,
        rayCount: 1000,
      },
    ]
    for (const s of states) {
      const back = deserialize(serialize(s))
      expect(back.heightCm).toBeCloseTo(s.heightCm, 9)
      expect(back.tiltXDeg).toBeCloseTo(s.tiltXDeg, 9)
      expect(back.tiltYDeg).toBeCloseTo(s.tiltYDeg, 9)
      expect(back.offsetX).toBe(s.offsetX)
      expect(back.offsetY).toBe(s.offsetY)
      expect(back.radius).toBe(s.radius)
      expect(back.rayCount).toBe(s.rayCount)
    }
  })

  it('rejects ray counts outside the offered choices', () => {
    expect(() =>
      serialize({ ...DEFAULT_PROBE, rayCount: 555 as never })
    ).toThrow(/ray count/)
  })

  it('rejects non-positive fixed radius', () => {
    expect(() => serialize({ ...DEFAULT_PROBE, radius: -5 })).toThrow(/radius/)
  })
})
