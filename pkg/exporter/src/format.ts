/**
 * Binary activation-tensor format and dataset manifest, matching the
 * gramsec interchange contract byte for byte.
 *
 * Activation file (little-endian): magic "GRAM" | version u32 = 1 |
 * layer count u32 | per layer: layer_id u32, K u32, m u32, n u32,
 * then K*m*n float32 values in channel-major order.
 */

import * as fs from 'fs'
import * as path from 'path'

export const MAGIC = 'GRAM'
export const FORMAT_VERSION = 1

export interface ActivationRecord {
  layerId: number
  channels: number
  height: number
  width: number
  /** length channels * height * width, channel-major */
  values: Float32Array
}

export function encodeActivations(records: ActivationRecord[]): Buffer {
  let size = 12
  for (const r of records) size += 16 + r.values.length * 4
  const buffer = Buffer.alloc(size)
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength)
  buffer.write(MAGIC, 0, 'ascii')
  view.setUint32(4, FORMAT_VERSION, true)
  view.setUint32(8, records.length, true)
  let offset = 12
  for (const r of records) {
    if (r.values.length !== r.channels * r.height * r.width) {
      throw new Error(
        `layer ${r.layerId}: expected ${r.channels * r.height * r.width} values, got ${r.values.length}`,
      )
    }
    view.setUint32(offset, r.layerId, true)
    view.setUint32(offset + 4, r.channels, true)
    view.setUint32(offset + 8, r.height, true)
    view.setUint32(offset + 12, r.width, true)
    offset += 16
    for (let i = 0; i < r.values.length; i++) {
      const v = r.values[i]
      if (!Number.isFinite(v)) {
        throw new Error(`layer ${r.layerId}: non-finite activation at index ${i}`)
      }
      view.setFloat32(offset, v, true)
      offset += 4
    }
  }
  return buffer
}

export function decodeActivations(buffer: Buffer): ActivationRecord[] {
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength)
  if (buffer.length < 12 || buffer.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic: not an activation file')
  }
  const version = view.getUint32(4, true)
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported format version ${version}`)
  }
  const layerCount = view.getUint32(8, true)
  const records: ActivationRecord[] = []
  let offset = 12
  for (let layer = 0; layer < layerCount; layer++) {
    if (offset + 16 > buffer.length) {
      throw new Error(`truncated: layer ${layer} header incomplete`)
    }
    const layerId = view.getUint32(offset, true)
    const channels = view.getUint32(offset + 4, true)
    const height = view.getUint32(offset + 8, true)
    const width = view.getUint32(offset + 12, true)
    offset += 16
    const count = channels * height * width
    if (offset + count * 4 > buffer.length) {
      throw new Error(
        `truncated: layer ${layerId} payload needs ${count * 4} bytes, ` +
          `only ${buffer.length - offset} available`,
      )
    }
    const values = new Float32Array(count)
    for (let i = 0; i < count; i++) {
      values[i] = view.getFloat32(offset, true)
      offset += 4
    }
    records.push({ layerId, channels, height, width, values })
  }
  return records
}

export function writeActivationFile(filePath: string, records: ActivationRecord[]): void {
  // write-temp-then-rename so readers never observe a partial file
  const tmp = filePath + '.tmp'
  fs.writeFileSync(tmp, encodeActivations(records))
  fs.renameSync(tmp, filePath)
}

export function readActivationFile(filePath: string): ActivationRecord[] {
  return decodeActivations(fs.readFileSync(filePath))
}

export type Split = 'train' | 'validation' | 'test'

export interface ManifestEntry {
  id: string
  split: Split
  label: number
  /** resolved absolute path of the activation file */
  path: string
}

export interface Manifest {
  numClasses: number
  entries: ManifestEntry[]
}

export function readManifest(manifestPath: string): Manifest {
  const raw = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'))
  if (typeof raw.num_classes !== 'number' || !Array.isArray(raw.entries)) {
    throw new Error(`${manifestPath}: expected "num_classes" and "entries"`)
  }
  const base = path.dirname(path.resolve(manifestPath))
  const seen = new Set<string>()
  const entries: ManifestEntry[] = raw.entries.map((item: any, index: number) => {
    const { id, split, label } = item
    if (typeof id !== 'string' || typeof item.path !== 'string') {
      throw new Error(`entry ${index}: missing id or path`)
    }
    if (!['train', 'validation', 'test'].includes(split)) {
      throw new Error(`entry ${index} (${id}): unknown split "${split}"`)
    }
    if (!Number.isInteger(label) || label < 0 || label >= raw.num_classes) {
      throw new Error(`entry ${index} (${id}): label ${label} out of range`)
    }
    if (seen.has(id)) throw new Error(`entry ${index}: duplicate sample id "${id}"`)
    seen.add(id)
    const resolved = path.isAbsolute(item.path) ? item.path : path.join(base, item.path)
    return { id, split, label, path: resolved }
  })
  return { numClasses: raw.num_classes, entries }
}

export function writeManifest(manifestPath: string, manifest: Manifest, relativeTo?: string): void {
  const payload = {
    num_classes: manifest.numClasses,
    entries: manifest.entries.map((e) => ({
      id: e.id,
      split: e.split,
      label: e.label,
      path: relativeTo ? path.relative(relativeTo, e.path) : e.path,
    })),
  }
  fs.writeFileSync(manifestPath, JSON.stringify(payload, null, 2) + '\n')
}
