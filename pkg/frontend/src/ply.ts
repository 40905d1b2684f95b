// Minimal PLY reader for the meshes the server serves: ascii or
// binary_little_endian, vertex x/y/z (+ optional nx/ny/nz) as
// float/double, faces as "list uchar int vertex_indices".

export interface ParsedMesh {
  positions: Float32Array
  normals: Float32Array | null
  indices: Uint32Array
}

type Scalar = 'float' | 'double' | 'int' | 'uint' | 'uchar' | 'char' | 'short' | 'ushort'

interface Property {
  name: string
  kind: 'scalar' | 'list'
  type: Scalar
  countType?: Scalar
}

interface Element {
  name: string
  count: number
  props: Property[]
}

const SIZES: Record<Scalar, number> = {
  char: 1, uchar: 1, short: 2, ushort: 2, int: 4, uint: 4, float: 4, double: 8,
}

function readScalar(view: DataView, offset: number, type: Scalar): number {
  switch (type) {
    case 'char': return view.getInt8(offset)
    case 'uchar': return view.getUint8(offset)
    case 'short': return view.getInt16(offset, true)
    case 'ushort': return view.getUint16(offset, true)
    case 'int': return view.getInt32(offset, true)
    case 'uint': return view.getUint32(offset, true)
    case 'float': return view.getFloat32(offset, true)
    case 'double': return view.getFloat64(offset, true)
  }
}

function parseHeader(text: string): {
  format: string
  elements: Element[]
  headerEnd: number
} {
  const end = text.indexOf('end_header')
  if (!text.startsWith('ply') || end < 0) {
    throw new Error('not a PLY file')
  }
  const headerEnd = text.indexOf('\n', end) + 1
  const lines = text.slice(0, end).split('\n')
  let format = ''
  const elements: Element[] = []
  for (const line of lines) {
    const tok = line.trim().split(/\s+/)
    if (tok[0] === 'format') {
      format = tok[1]
    } else if (tok[0] === 'element') {
      elements.push({ name: tok[1], count: parseInt(tok[2], 10), props: [] })
    } else if (tok[0] === 'property') {
      const el = elements[elements.length - 1]
      if (!el) throw new Error('property before element')
      if (tok[1] === 'list') {
        el.props.push({
          name: tok[4],
          kind: 'list',
          countType: tok[2] as Scalar,
          type: tok[3] as Scalar,
        })
      } else {
        el.props.push({ name: tok[2], kind: 'scalar', type: tok[1] as Scalar })
      }
    }
  }
  return { format, elements, headerEnd }
}

function triangulate(face: number[], out: number[]): void {
  for (let i = 1; i + 1 < face.length; i++) {
    out.push(face[0], face[i], face[i + 1])
  }
}

export function parsePly(buffer: ArrayBuffer): ParsedMesh {
  const headProbe = new TextDecoder().decode(
    buffer.slice(0, Math.min(buffer.byteLength, 65536))
  )
  const { format, elements, headerEnd } = parseHeader(headProbe)
  const rows: Record<string, Record<string, number | number[]>[]> = {}

  if (format === 'binary_little_endian') {
    const view = new DataView(buffer)
    let offset = headerEnd
    for (const el of elements) {
      const list: Record<string, number | number[]>[] = []
      for (let i = 0; i < el.count; i++) {
        const row: Record<string, number | number[]> = {}
        for (const p of el.props) {
          if (p.kind === 'list') {
            const n = readScalar(view, offset, p.countType!)
            offset += SIZES[p.countType!]
            const values: number[] = []
            for (let j = 0; j < n; j++) {
              values.push(readScalar(view, offset, p.type))
              offset += SIZES[p.type]
            }
            row[p.name] = values
          } else {
            row[p.name] = readScalar(view, offset, p.type)
            offset += SIZES[p.type]
          }
        }
        list.push(row)
      }
      rows[el.name] = list
    }
  } else if (format === 'ascii') {
    const body = new TextDecoder().decode(buffer.slice(headerEnd))
    const lines = body.split('\n').filter((l) => l.trim().length > 0)
    let cursor = 0
    for (const el of elements) {
      const list: Record<string, number | number[]>[] = []
      for (let i = 0; i < el.count; i++) {
        const tok = lines[cursor++].trim().split(/\s+/).map(Number)
        const row: Record<string, number | number[]> = {}
        let at = 0
        for (const p of el.props) {
          if (p.kind === 'list') {
            const n = tok[at++]
            row[p.name] = tok.slice(at, at + n)
            at += n
          } else {
            row[p.name] = tok[at++]
          }
        }
        list.push(row)
      }
      rows[el.name] = list
    }
  } else {
    throw new Error(`unsupported PLY format ${format}`)
  }

  const verts = rows['vertex']
  if (!verts) throw new Error('PLY has no vertex element')
  const positions = new Float32Array(verts.length * 3)
  const hasNormals = verts.length > 0 && 'nx' in verts[0]
  const normals = hasNormals ? new Float32Array(verts.length * 3) : null
  verts.forEach((v, i) => {
    positions[3 * i] = v.x as number
    positions[3 * i + 1] = v.y as number
    positions[3 * i + 2] = v.z as number
    if (normals) {
      normals[3 * i] = v.nx as number
      normals[3 * i + 1] = v.ny as number
      normals[3 * i + 2] = v.nz as number
    }
  })
  const tri: number[] = []
  for (const f of rows['face'] ?? []) {
    const idx = (f['vertex_indices'] ?? f['vertex_index']) as number[]
    triangulate(idx, tri)
  }
  return { positions, normals, indices: new Uint32Array(tri) }
}
