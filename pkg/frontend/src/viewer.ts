import * as THREE from 'three'
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js'
import type { ParsedMesh } from './ply.js'

// Three.js scene wrapper: the active model, an optional translucent
// comparison model, the measurement-circle gizmo and the section
// polygon drawn on the surface. The polygon is display-only; all
// numbers shown in the UI come from the server.

export type ViewPreset = 'frontal' | 'lateral'

export interface Viewer {
  setModel: (mesh: ParsedMesh) => void
  setOverlay: (mesh: ParsedMesh | null) => void
  setGizmo: (center: [number, number, number], normal: [number, number, number], radius: number) => void
  setSectionRing: (center: [number, number, number], normal: [number, number, number], radius: number) => void
  clearSectionRing: () => void
  setView: (preset: ViewPreset) => void
  resize: () => void
  dispose: () => void
}

function toGeometry(mesh: ParsedMesh): THREE.BufferGeometry {
  const geom = new THREE.BufferGeometry()
  geom.setAttribute('position', new THREE.BufferAttribute(mesh.positions, 3))
  if (mesh.normals) {
    geom.setAttribute('normal', new THREE.BufferAttribute(mesh.normals, 3))
  }
  geom.setIndex(new THREE.BufferAttribute(mesh.indices, 1))
  if (!mesh.normals) geom.computeVertexNormals()
  return geom
}

function basisFor(normal: THREE.Vector3): [THREE.Vector3, THREE.Vector3] {
  const helper =
    Math.abs(normal.x) < 0.9
      ? new THREE.Vector3(1, 0, 0)
      : new THREE.Vector3(0, 1, 0)
  const u = new THREE.Vector3().crossVectors(normal, helper).normalize()
  const v = new THREE.Vector3().crossVectors(normal, u)
  return [u, v]
}

export function createViewer(container: HTMLElement): Viewer {
  const renderer = new THREE.WebGLRenderer({ antialias: true })
  renderer.setPixelRatio(Math.min(window.devicePixelRatio, 2))
  renderer.setSize(container.clientWidth, container.clientHeight)
  renderer.setClearColor(0x101418)
  container.appendChild(renderer.domElement)

  const scene = new THREE.Scene()
  const camera = new THREE.PerspectiveCamera(
    45,
    container.clientWidth / Math.max(1, container.clientHeight),
    0.1,
    5000
  )
  camera.up.set(0, 0, 1) // lab frame: z is vertical
  camera.position.set(0, -250, 120)

  const controls = new OrbitControls(camera, renderer.domElement)
  controls.enableDamping = true
  controls.target.set(0, 0, 80)

  scene.add(new THREE.HemisphereLight(0xffffff, 0x303040, 0.9))
  const key = new THREE.DirectionalLight(0xffffff, 0.9)
  key.position.set(200, -300, 400)
  scene.add(key)

  const modelMaterial = new THREE.MeshStandardMaterial({
    color: 0x7aa2c4,
    metalness: 0.05,
    roughness: 0.75,
    side: THREE.DoubleSide,
  })
  const overlayMaterial = new THREE.MeshStandardMaterial({
    color: 0xc48a7a,
    transparent: true,
    opacity: 0.35,
    depthWrite: false,
    side: THREE.DoubleSide,
  })

  let model: THREE.Mesh | null = null
  let overlay: THREE.Mesh | null = null
  let gizmo: THREE.LineLoop | null = null
  let ring: THREE.LineLoop | null = null

  const replace = (
    old: THREE.Object3D | null,
    next: THREE.Object3D | null
  ): void => {
    if (old) {
      scene.remove(old)
      if (old instanceof THREE.Mesh || old instanceof THREE.LineLoop) {
        old.geometry.dispose()
      }
    }
    if (next) scene.add(next)
  }

  const circleLoop = (
    center: [number, number, number],
    normal: [number, number, number],
    radius: number,
    color: number
  ): THREE.LineLoop => {
    const n = new THREE.Vector3(...normal).normalize()
    const [u, v] = basisFor(n)
    const c = new THREE.Vector3(...center)
    const pts: THREE.Vector3[] = []
    for (let i = 0; i < 128; i++) {
      const a = (2 * Math.PI * i) / 128
      pts.push(
        c
          .clone()
          .addScaledVector(u, radius * Math.cos(a))
          .addScaledVector(v, radius * Math.sin(a))
      )
    }
    const geom = new THREE.BufferGeometry().setFromPoints(pts)
    return new THREE.LineLoop(geom, new THREE.LineBasicMaterial({ color }))
  }

  let disposed = false
  const animate = (): void => {
    if (disposed) return
    requestAnimationFrame(animate)
    controls.update()
    renderer.render(scene, camera)
  }
  animate()

  return {
    setModel(mesh) {
      replace(model, (model = new THREE.Mesh(toGeometry(mesh), modelMaterial)))
    },
    setOverlay(mesh) {
      replace(
        overlay,
        (overlay = mesh ? new THREE.Mesh(toGeometry(mesh), overlayMaterial) : null)
      )
    },
    setGizmo(center, normal, radius) {
      replace(gizmo, (gizmo = circleLoop(center, normal, radius, 0xf0d060)))
    },
    setSectionRing(center, normal, radius) {
      replace(ring, (ring = circleLoop(center, normal, radius, 0x60f080)))
    },
    clearSectionRing() {
      replace(ring, (ring = null))
    },
    setView(preset) {
      const distance = camera.position.distanceTo(controls.target)
      const t = controls.target
      if (preset === 'frontal') {
        camera.position.set(t.x, t.y - distance, t.z)
      } else {
        camera.position.set(t.x + distance, t.y, t.z)
      }
      camera.lookAt(t)
    },
    resize() {
      camera.aspect = container.clientWidth / Math.max(1, container.clientHeight)
      camera.updateProjectionMatrix()
      renderer.setSize(container.clientWidth, container.clientHeight)
    },
    dispose() {
      disposed = true
      controls.dispose()
      renderer.dispose()
      container.removeChild(renderer.domElement)
    },
  }
}
