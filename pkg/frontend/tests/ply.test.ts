import { readFileSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'
import { parsePly } from '../src/ply.js'

const fixture = (name: string): ArrayBuffer => {
  const buf = readFileSync(join(__dirname, 'fixtures', name))
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength)
}

describe('ply parser', () => {
  it('parses the binary cube the server serves', () => {
    const mesh = parsePly(fixture('cube15.ply'))
    expect(mesh.positions.length).toBe(8 * 3)
    expect(mesh.indices.length).toBe(12 * 3)
    const xs = Array.from({ length: 8 }, (_, i) => mesh.positions[3 * i])
    expect(Math.min(...xs)).toBeCloseTo(-7.5, 5)
    expect(Math.max(...xs)).toBeCloseTo(7.5, 5)
    for (const idx of mesh.indices) expect(idx).toBeLessThan(8)
  })

  it('parses the ascii flavor to the same mesh', () => {
    const bin = parsePly(fixture('cube15.ply'))
    const asc = parsePly(fixture('cube15_ascii.ply'))
    expect(Array.from(asc.indices)).toEqual(Array.from(bin.indices))
    for (let i = 0; i < bin.positions.length; i++) {
      expect(asc.positions[i]).toBeCloseTo(bin.positions[i], 4)
    }
  })

  it('fan-triangulates quads', () => {
    const text = [
      'ply', 'format ascii 1.0',
      'element vertex 4',
      'property float x', 'property float y', 'property float z',
      'element face 1',
      'property list uchar int vertex_indices',
      'end_header',
      '0 0 0', '1 0 0', '1 1 0', '0 1 0',
      '4 0 1 2 3',
      '',
    ].join('\n')
    const mesh = parsePly(new TextEncoder().encode(text).buffer)
    expect(Array.from(mesh.indices)).toEqual([0, 1, 2, 0, 2, 3])
  })

  it('rejects non-PLY payloads', () => {
    expect(() => parsePly(new TextEncoder().encode('solid nope').buffer)).toThrow(
      /not a PLY/
    )
  })
})
