import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { afterAll, describe, expect, it } from 'vitest'

import { exportDataset } from '../src/export'
import {
  ActivationRecord,
  readActivationFile,
  readManifest,
  writeActivationFile,
  writeManifest,
} from '../src/format'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'gramsec-export-'))
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

function spectrogramRecord(height: number, width: number, seed: number): ActivationRecord {
  const values = new Float32Array(height * width)
  for (let i = 0; i < values.length; i++) {
    values[i] = Math.fround(0.5 + 0.5 * Math.sin(seed + i * 0.1))
  }
  return { layerId: 0, channels: 1, height, width, values }
}

function makeDataset(dir: string, sizes: [number, number][]) {
  fs.mkdirSync(dir, { recursive: true })
  const splits = ['train', 'validation', 'test'] as const
  const entries = sizes.map(([height, width], i) => {
    const id = `s${i}`
    const file = path.join(dir, `${id}.gram`)
    writeActivationFile(file, [spectrogramRecord(height, width, i)])
    return { id, split: splits[i % 3], label: i % 2, path: file }
  })
  const manifestPath = path.join(dir, 'manifest.json')
  writeManifest(manifestPath, { numClasses: 2, entries }, dir)
  return manifestPath
}

describe('exportDataset', () => {
  it('exports every sample with layers in forward order', async () => {
    const manifestPath = makeDataset(
      path.join(tmp, 'in'),
      Array.from({ length: 6 }, () => [32, 20] as [number, number]),
    )
    const outDir = path.join(tmp, 'out')
    const manifest = await exportDataset({
      architecture: 'toy-2layer',
      layers: ['conv2', 'conv1'], // spelled backwards on purpose
      manifestPath,
      outDir,
      batchSize: 4,
    })
    expect(manifest.entries).toHaveLength(6)
    const onDisk = readManifest(path.join(outDir, 'manifest.json'))
    expect(onDisk.entries.map((e) => e.split)).toEqual(
      readManifest(manifestPath).entries.map((e) => e.split),
    )
    for (const entry of onDisk.entries) {
      const records = readActivationFile(entry.path)
      expect(records.map((r) => r.layerId)).toEqual([0, 1])
      expect(records[0].channels).toBe(4) // conv1 comes first regardless
      expect(records[1].channels).toBe(8)
      expect(records[0].height).toBe(32)
      expect(records[0].width).toBe(20)
      expect(records[1].height).toBe(16) // after the 2x2 pool
      expect(records[1].width).toBe(10)
    }
  })

  it('is deterministic for a fixed dataset', async () => {
    const manifestPath = makeDataset(
      path.join(tmp, 'det_in'),
      Array.from({ length: 3 }, () => [16, 12] as [number, number]),
    )
    const outA = path.join(tmp, 'det_a')
    const outB = path.join(tmp, 'det_b')
    await exportDataset({
      architecture: 'toy-2layer', layers: ['conv1', 'conv2'], manifestPath, outDir: outA,
    })
    await exportDataset({
      architecture: 'toy-2layer', layers: ['conv1', 'conv2'], manifestPath, outDir: outB,
    })
    for (const name of fs.readdirSync(outA)) {
      if (!name.endsWith('.gram')) continue
      expect(fs.readFileSync(path.join(outA, name))).toEqual(
        fs.readFileSync(path.join(outB, name)),
      )
    }
  })

  it('rejects capture-point typos and lists what exists', async () => {
    const manifestPath = makeDataset(path.join(tmp, 'typo_in'), [[16, 12]])
    await expect(
      exportDataset({
        architecture: 'toy-2layer',
        layers: ['conv_one'],
        manifestPath,
        outDir: path.join(tmp, 'typo_out'),
      }),
    ).rejects.toThrow(/unknown capture point "conv_one"; available: conv1, conv2/)
  })

  it('rejects heterogeneous spectrogram shapes', async () => {
    const manifestPath = makeDataset(path.join(tmp, 'hetero_in'), [
      [16, 12],
      [16, 14],
    ])
    await expect(
      exportDataset({
        architecture: 'toy-2layer',
        layers: ['conv1'],
        manifestPath,
        outDir: path.join(tmp, 'hetero_out'),
      }),
    ).rejects.toThrow(/dataset started with 16x12/)
  })

  it('rejects an empty capture list', async () => {
    const manifestPath = makeDataset(path.join(tmp, 'empty_in'), [[16, 12]])
    await expect(
      exportDataset({
        architecture: 'toy-2layer',
        layers: [],
        manifestPath,
        outDir: path.join(tmp, 'empty_out'),
      }),
    ).rejects.toThrow(/at least one capture point/)
  })
})
