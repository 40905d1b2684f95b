import { describe, expect, it } from 'vitest'
import type { SessionInfo } from '../src/api.js'
import { TimelineState } from '../src/timeline.js'

const sessions: SessionInfo[] = [
  { session: 's1', timestamp: '2026-01-05T10:00:00', model_id: 'cube15' },
  { session: 's2', timestamp: '2026-02-05T10:00:00', model_id: 'cube14' },
]

describe('timeline state', () => {
  it('keeps the active index in range', () => {
    const t = new TimelineState(sessions)
    t.setActive(1)
    expect(t.activeSession?.session).toBe('s2')
    expect(() => t.setActive(2)).toThrow(RangeError)
    expect(() => t.setActive(-1)).toThrow(RangeError)
    expect(() => t.setActive(0.5)).toThrow(RangeError)
  })

  it('requires a distinct comparison pair', () => {
    const t = new TimelineState(sessions)
    expect(() => t.setComparison('s1', 's1')).toThrow(/distinct/)
    t.setComparison('s1', 's2')
    expect(t.comparison).toEqual({ a: 's1', b: 's2', translucent: true })
  })

  it('disables comparison below two sessions', () => {
    const t = new TimelineState(sessions.slice(0, 1))
    expect(t.comparisonEnabled).toBe(false)
    expect(() => t.setComparison('s1', 's2')).toThrow(/two sessions/)
  })

  it('rejects unknown session ids in the pair', () => {
    const t = new TimelineState(sessions)
    expect(() => t.setComparison('s1', 'nope')).toThrow(RangeError)
  })

  it('clears the comparison', () => {
    const t = new TimelineState(sessions)
    t.setComparison('s2', 's1', false)
    expect(t.comparison?.translucent).toBe(false)
    t.clearComparison()
    expect(t.comparison).toBeNull()
  })
})
