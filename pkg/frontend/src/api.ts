// REST client for the girthkit server. The viewer never computes
// measurements locally: every displayed number is a server response.

export interface ModelInfo {
  id: string
  vertex_count: number
  triangle_count: number
}

export interface SessionInfo {
  session: string
  timestamp: string
  model_id: string
  meta?: Record<string, unknown> | null
}

export interface ProbeEcho {
  center: number[]
  normal: number[]
  radius: number | null
  ray_count: number
  height?: number
  h?: number
}

export interface Measurement {
  perimeter_cm: number
  area_cm2: number
  rays_fired: number
  rays_missed: number
  probe: ProbeEcho
  volume_cm3?: number
  slice_areas?: [number, number][]
}

export interface SessionMeasurement {
  session: string
  timestamp: string
  perimeter_cm: number
  area_cm2: number
}

export interface ProbeBody {
  center: [number, number, number]
  normal: [number, number, number]
  radius?: number | 'auto'
  rays?: number
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly errorType: string
  ) {
    super(message)
  }
}

async function raise(resp: Response): Promise<never> {
  let type = 'HttpError'
  let detail = `${resp.status} ${resp.statusText}`
  try {
    const body = await resp.json()
    if (body && typeof body.error === 'string') {
      type = body.error
      detail = body.detail ?? detail
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(detail, resp.status, type)
}

export class Client {
  constructor(
    readonly baseUrl = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args)
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path)
    if (!resp.ok) await raise(resp)
    return resp.json()
  }

  listModels(): Promise<ModelInfo[]> {
    return this.getJson('/models')
  }

  async fetchMesh(modelId: string, signal?: AbortSignal): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/models/${encodeURIComponent(modelId)}/mesh`,
      { signal }
    )
    if (!resp.ok) await raise(resp)
    return resp.arrayBuffer()
  }

  async measure(
    modelId: string,
    probe: ProbeBody,
    signal?: AbortSignal
  ): Promise<Measurement> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/models/${encodeURIComponent(modelId)}/measure`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(probe),
        signal,
      }
    )
    if (!resp.ok) await raise(resp)
    return resp.json()
  }

  listSessions(patientId: string): Promise<SessionInfo[]> {
    return this.getJson(`/patients/${encodeURIComponent(patientId)}/sessions`)
  }

  compare(
    patientId: string,
    probe: ProbeBody,
    sessions?: [string, string]
  ): Promise<SessionMeasurement[]> {
    const params = new URLSearchParams({ probe: JSON.stringify(probe) })
    if (sessions) params.set('sessions', sessions.join(','))
    return this.getJson(
      `/patients/${encodeURIComponent(patientId)}/compare?${params}`
    )
  }
}
