import { describe, expect, it, vi } from 'vitest'
import { ApiError, Client } from '../src/api.js'

describe('api client', () => {
  it('surfaces server error bodies as typed ApiErrors', async () => {
    const fetchFn = vi.fn(async () =>
      new Response(
        JSON.stringify({ error: 'UnknownModel', detail: "model 'x' not in store" }),
        { status: 404, statusText: 'Not Found' }
      )
    )
    const client = new Client('', fetchFn)
    const err = await client.listModels().catch((e) => e)
    expect(err).toBeInstanceOf(ApiError)
    expect(err.status).toBe(404)
    expect(err.errorType).toBe('UnknownModel')
    expect(err.message).toContain('not in store')
  })

  it('keeps the status line for non-JSON error bodies', async () => {
    const fetchFn = vi.fn(async () =>
      new Response('boom', { status: 500, statusText: 'Internal Server Error' })
    )
    const err = await new Client('', fetchFn).listModels().catch((e) => e)
    expect(err.errorType).toBe('HttpError')
    expect(err.message).toContain('500')
  })

  it('encodes the compare query with probe JSON and session pair', async () => {
    const fetchFn = vi.fn(async () => new Response('[]', { status: 200 }))
    const client = new Client('', fetchFn)
    await client.compare(
      'p1',
      { center: [0, 0, 0], normal: [0, 0, 1], radius: 'auto', rays: 100 },
      ['s1', 's2']
    )
    const url = new URL(String(fetchFn.mock.calls[0][0]), 'http://x')
    expect(url.pathname).toBe('/patients/p1/compare')
    expect(url.searchParams.get('sessions')).toBe('s1,s2')
    expect(JSON.parse(url.searchParams.get('probe')!)).toEqual({
      center: [0, 0, 0],
      normal: [0, 0, 1],
      radius: 'auto',
      rays: 100,
    })
  })

  it('posts the probe body verbatim on measure', async () => {
    const fetchFn = vi.fn(async () =>
      new Response(
        JSON.stringify({
          perimeter_cm: 1, area_cm2: 1, rays_fired: 1, rays_missed: 0,
          probe: { center: [0, 0, 0], normal: [0, 0, 1], radius: null, ray_count: 1 },
        }),
        { status: 200 }
      )
    )
    const client = new Client('', fetchFn)
    const probe = {
      center: [0, 0, 7.5] as [number, number, number],
      normal: [0, 0, 1] as [number, number, number],
      radius: 'auto' as const,
      rays: 1000,
    }
    await client.measure('cube15', probe)
    const init = fetchFn.mock.calls[0][1] as RequestInit
    expect(init.method).toBe('POST')
    expect(JSON.parse(init.body as string)).toEqual(probe)
  })
})
