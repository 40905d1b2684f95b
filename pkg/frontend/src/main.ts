import { ApiError, Client } from './api.js'
import type { Measurement, SessionInfo, SessionMeasurement } from './api.js'
import { LiveMeasure } from './measure.js'
import { parsePly } from './ply.js'
import {
  DEFAULT_PROBE,
  ProbeState,
  RAY_COUNT_CHOICES,
  RayCount,
  probeNormal,
  serialize,
} from './probe.js'
import { TimelineState } from './timeline.js'
import { createViewer, Viewer } from './viewer.js'

// Single-page wiring: patient sessions on a scroll bar, the active
// session's model in the 3D view, the probe widget driving live
// server-side measurements, and the two-session comparison overlay.

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id)
  if (!el) throw new Error(`missing #${id}`)
  return el as T
}

const client = new Client('')
let viewer: Viewer
let probe: ProbeState = { ...DEFAULT_PROBE }
let timeline = new TimelineState([])
let activeModelId: string | null = null

const banner = (): HTMLElement => $('error-banner')

function showError(message: string): void {
  banner().textContent = message
  banner().hidden = false
}

function clearError(): void {
  banner().hidden = true
}

const live = new LiveMeasure(client, {
  onResult: (m: Measurement) => {
    clearError()
    $('perimeter-value').textContent = `${m.perimeter_cm.toFixed(2)} cm`
    $('area-value').textContent = `${m.area_cm2.toFixed(2)} cm²`
    const radius = m.probe.radius ?? m.perimeter_cm / (2 * Math.PI)
    viewer.setSectionRing(
      m.probe.center as [number, number, number],
      m.probe.normal as [number, number, number],
      radius
    )
  },
  onError: (message: string) => {
    $('perimeter-value').textContent = '—'
    $('area-value').textContent = '—'
    viewer.clearSectionRing()
    showError(message)
  },
})

function gizmoRadius(): number {
  return probe.radius === 'auto' ? 40 : probe.radius
}

function refreshMeasurement(): void {
  if (!activeModelId) return
  viewer.setGizmo(
    [probe.offsetX, probe.offsetY, probe.heightCm],
    probeNormal(probe),
    gizmoRadius()
  )
  live.request(activeModelId, serialize(probe))
}

async function loadModel(modelId: string): Promise<void> {
  try {
    const buffer = await client.fetchMesh(modelId)
    viewer.setModel(parsePly(buffer))
    activeModelId = modelId
    clearError()
    refreshMeasurement()
  } catch (err) {
    showError(err instanceof ApiError ? err.message : String(err))
  }
}

function renderMeta(session: SessionInfo | null): void {
  const panel = $('meta-panel')
  panel.textContent = ''
  const meta = session?.meta ?? null
  if (!meta) return
  for (const [key, value] of Object.entries(meta)) {
    const row = document.createElement('div')
    row.textContent = `${key}: ${JSON.stringify(value)}`
    panel.appendChild(row)
  }
}

function renderChart(series: SessionMeasurement[]): void {
  const svg = $('series-chart')
  svg.textContent = ''
  if (series.length === 0) return
  const values = series.map((s) => s.perimeter_cm)
  const lo = Math.min(...values)
  const hi = Math.max(...values)
  const pad = (hi - lo) * 0.2 || 1
  const x = (i: number): number =>
    20 + (260 * i) / Math.max(1, series.length - 1)
  const y = (v: number): number =>
    110 - (100 * (v - lo + pad)) / (hi - lo + 2 * pad)
  const ns = 'http://www.w3.org/2000/svg'
  series.forEach((s, i) => {
    if (i > 0) {
      const line = document.createElementNS(ns, 'line')
      line.setAttribute('x1', String(x(i - 1)))
      line.setAttribute('y1', String(y(values[i - 1])))
      line.setAttribute('x2', String(x(i)))
      line.setAttribute('y2', String(y(values[i])))
      line.setAttribute('stroke', '#7aa2c4')
      svg.appendChild(line)
    }
    const dot = document.createElementNS(ns, 'circle')
    dot.setAttribute('cx', String(x(i)))
    dot.setAttribute('cy', String(y(values[i])))
    dot.setAttribute('r', '4')
    dot.setAttribute('fill', '#f0d060')
    svg.appendChild(dot)
    const label = document.createElementNS(ns, 'text')
    label.setAttribute('x', String(x(i)))
    label.setAttribute('y', '125')
    label.setAttribute('fill', '#ccc')
    label.setAttribute('font-size', '10')
    label.setAttribute('text-anchor', 'middle')
    label.textContent = `${s.session}: ${s.perimeter_cm.toFixed(2)}`
    svg.appendChild(label)
  })
}

async function activateSession(index: number): Promise<void> {
  timeline.setActive(index)
  const session = timeline.activeSession
  if (!session) return
  $('active-session').textContent = `${session.session} (${session.timestamp})`
  renderMeta(session)
  await loadModel(session.model_id)
}

async function openComparison(): Promise<void> {
  const patient = ($('patient-input') as HTMLInputElement).value.trim()
  const a = ($('compare-a') as HTMLSelectElement).value
  const b = ($('compare-b') as HTMLSelectElement).value
  try {
    timeline.setComparison(a, b)
    const pair = timeline.comparison!
    const sessionA = timeline.sessions.find((s) => s.session === pair.a)!
    const sessionB = timeline.sessions.find((s) => s.session === pair.b)!
    await loadModel(sessionA.model_id)
    const buffer = await client.fetchMesh(sessionB.model_id)
    viewer.setOverlay(parsePly(buffer))
    const series = await client.compare(patient, serialize(probe), [
      pair.a,
      pair.b,
    ])
    renderChart(series)
    clearError()
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err))
  }
}

function syncComparisonControls(): void {
  const enabled = timeline.comparisonEnabled
  ;($('compare-open') as HTMLButtonElement).disabled = !enabled
  for (const id of ['compare-a', 'compare-b']) {
    const select = $(id) as HTMLSelectElement
    select.disabled = !enabled
    select.textContent = ''
    for (const s of timeline.sessions) {
      const opt = document.createElement('option')
      opt.value = s.session
      opt.textContent = s.session
      select.appendChild(opt)
    }
  }
  if (enabled) (($('compare-b') as HTMLSelectElement).selectedIndex = 1)
}

async function loadPatient(): Promise<void> {
  const patient = ($('patient-input') as HTMLInputElement).value.trim()
  if (!patient) return
  try {
    const sessions = await client.listSessions(patient)
    timeline = new TimelineState(sessions)
    const bar = $('timeline-bar') as HTMLInputElement
    bar.max = String(Math.max(0, sessions.length - 1))
    bar.value = '0'
    bar.disabled = sessions.length === 0
    syncComparisonControls()
    viewer.setOverlay(null)
    renderChart([])
    if (sessions.length > 0) await activateSession(0)
    clearError()
  } catch (err) {
    showError(err instanceof ApiError ? err.message : String(err))
  }
}

function bindProbeControls(): void {
  const bind = (
    id: string,
    apply: (value: number) => void
  ): void => {
    const input = $(id) as HTMLInputElement
    input.addEventListener('input', () => {
      apply(Number(input.value))
      refreshMeasurement()
    })
  }
  bind('height-slider', (v) => (probe = { ...probe, heightCm: v }))
  bind('tilt-x', (v) => (probe = { ...probe, tiltXDeg: v }))
  bind('tilt-y', (v) => (probe = { ...probe, tiltYDeg: v }))
  bind('offset-x', (v) => (probe = { ...probe, offsetX: v }))
  bind('offset-y', (v) => (probe = { ...probe, offsetY: v }))

  const rays = $('ray-count') as HTMLSelectElement
  for (const n of RAY_COUNT_CHOICES) {
    const opt = document.createElement('option')
    opt.value = String(n)
    opt.textContent = String(n)
    if (n === probe.rayCount) opt.selected = true
    rays.appendChild(opt)
  }
  rays.addEventListener('change', () => {
    probe = { ...probe, rayCount: Number(rays.value) as RayCount }
    refreshMeasurement()
  })
}

export function boot(): void {
  viewer = createViewer($('viewport'))
  bindProbeControls()
  $('patient-load').addEventListener('click', () => void loadPatient())
  $('timeline-bar').addEventListener('input', () => {
    const bar = $('timeline-bar') as HTMLInputElement
    void activateSession(Number(bar.value))
  })
  $('compare-open').addEventListener('click', () => void openComparison())
  $('view-frontal').addEventListener('click', () => viewer.setView('frontal'))
  $('view-lateral').addEventListener('click', () => viewer.setView('lateral'))
  window.addEventListener('resize', () => viewer.resize())
}

if (typeof document !== 'undefined' && document.getElementById('viewport')) {
  boot()
}
