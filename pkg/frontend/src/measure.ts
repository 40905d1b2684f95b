import type { Client, Measurement, ProbeBody } from './api.js'
import { ApiError } from './api.js'

// Live measurement loop: widget changes are debounced (150 ms) and at
// most one request is in flight; a newer request aborts the older one
// so only the latest result is ever displayed.

export const DEBOUNCE_MS = 150

export interface MeasureEvents {
  onResult: (m: Measurement) => void
  onError: (message: string) => void
  onBusy?: (busy: boolean) => void
}

export class LiveMeasure {
  private timer: ReturnType<typeof setTimeout> | null = null
  private inflight: AbortController | null = null
  private generation = 0

  constructor(
    private readonly client: Client,
    private readonly events: MeasureEvents,
    private readonly debounceMs = DEBOUNCE_MS
  ) {}

  /** Schedule a measurement; earlier pending/in-flight ones are dropped. */
  request(modelId: string, probe: ProbeBody): void {
    if (this.timer !== null) clearTimeout(this.timer)
    this.timer = setTimeout(() => {
      this.timer = null
      void this.fire(modelId, probe)
    }, this.debounceMs)
  }

  private async fire(modelId: string, probe: ProbeBody): Promise<void> {
    const gen = ++this.generation
    this.inflight?.abort()
    const controller = new AbortController()
    this.inflight = controller
    this.events.onBusy?.(true)
    try {
      const result = await this.client.measure(modelId, probe, controller.signal)
      if (gen === this.generation) this.events.onResult(result)
    } catch (err) {
      if (controller.signal.aborted || gen !== this.generation) return
      if (err instanceof ApiError && err.errorType === 'NoSection') {
        this.events.onError('no intersection at this height')
      } else {
        this.events.onError(err instanceof Error ? err.message : String(err))
      }
    } finally {
      if (gen === this.generation) {
        this.inflight = null
        this.events.onBusy?.(false)
      }
    }
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer)
    this.inflight?.abort()
  }
}
