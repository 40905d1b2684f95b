import type { SessionInfo } from './api.js'

// Session scroll-bar state plus the optional two-session comparison
// pair (rendered opaque vs translucent).

export interface ComparisonPair {
  a: string
  b: string
  translucent: boolean
}

export class TimelineState {
  private active = 0
  private pair: ComparisonPair | null = null

  constructor(readonly sessions: readonly SessionInfo[]) {}

  get length(): number {
    return this.sessions.length
  }

  get activeIndex(): number {
    return this.active
  }

  get activeSession(): SessionInfo | null {
    return this.sessions[this.active] ?? null
  }

  get comparison(): ComparisonPair | null {
    return this.pair
  }

  get comparisonEnabled(): boolean {
    return this.sessions.length >= 2
  }

  setActive(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.sessions.length) {
      throw new RangeError(`session index ${index} out of range`)
    }
    this.active = index
  }

  setComparison(a: string, b: string, translucent = true): void {
    if (!this.comparisonEnabled) {
      throw new Error('comparison needs at least two sessions')
    }
    if (a === b) {
      throw new Error('comparison pair must be two distinct sessions')
    }
    const ids = this.sessions.map((s) => s.session)
    for (const id of [a, b]) {
      if (!ids.includes(id)) throw new RangeError(`unknown session ${id}`)
    }
    this.pair = { a, b, translucent }
  }

  clearComparison(): void {
    this.pair = null
  }
}
