/**
 * Cross-boundary acceptance: activations exported here must be read by the
 * Python side with zero float32 drift, and `gramsec summarize` + `gramsec
 * fit` must complete on the exported manifest. Requires the gramsec CLI
 * (the Python package) on PATH.
 */

import { execFileSync } from 'child_process'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { afterAll, describe, expect, it } from 'vitest'

import { exportDataset } from '../src/export'
import { readActivationFile, readManifest, writeManifest } from '../src/format'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'gramsec-xb-'))
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

function writeWav(filePath: string, samples: Float32Array, rate: number): void {
  const buffer = Buffer.alloc(44 + samples.length * 2)
  buffer.write('RIFF', 0, 'ascii')
  buffer.writeUInt32LE(36 + samples.length * 2, 4)
  buffer.write('WAVE', 8, 'ascii')
  buffer.write('fmt ', 12, 'ascii')
  buffer.writeUInt32LE(16, 16)
  buffer.writeUInt16LE(1, 20) // PCM
  buffer.writeUInt16LE(1, 22) // mono
  buffer.writeUInt32LE(rate, 24)
  buffer.writeUInt32LE(rate * 2, 28)
  buffer.writeUInt16LE(2, 32)
  buffer.writeUInt16LE(16, 34)
  buffer.write('data', 36, 'ascii')
  buffer.writeUInt32LE(samples.length * 2, 40)
  for (let i = 0; i < samples.length; i++) {
    const clipped = Math.max(-1, Math.min(1, samples[i]))
    buffer.writeInt16LE(Math.round(clipped * 32767), 44 + i * 2)
  }
  fs.writeFileSync(filePath, buffer)
}

function tone(freq: number, amplitude: number, rate = 16000, seconds = 1): Float32Array {
  const samples = new Float32Array(rate * seconds)
  for (let i = 0; i < samples.length; i++) {
    samples[i] = amplitude * Math.sin((2 * Math.PI * freq * i) / rate)
  }
  return samples
}

function gramsec(...args: string[]): string {
  return execFileSync('gramsec', args, { encoding: 'utf-8' })
}

describe('cross-boundary round trip', () => {
  it('exported activations feed gramsec summarize and fit with zero drift', async () => {
    // two classes of tones, one sample per split each
    const wavDir = path.join(tmp, 'wav')
    const specDir = path.join(tmp, 'spec')
    fs.mkdirSync(wavDir, { recursive: true })
    fs.mkdirSync(specDir, { recursive: true })

    const splits = ['train', 'validation', 'test'] as const
    const entries = []
    for (let label = 0; label < 2; label++) {
      for (let s = 0; s < splits.length; s++) {
        const id = `c${label}_${splits[s]}`
        const freq = label === 0 ? 500 : 3000
        const wavPath = path.join(wavDir, `${id}.wav`)
        writeWav(wavPath, tone(freq, 0.6 + 0.05 * s), 16000)
        const specPath = path.join(specDir, `${id}.gram`)
        gramsec('spectrogram', '--in', wavPath, '--out', specPath)
        entries.push({ id, split: splits[s], label, path: specPath })
      }
    }
    const inManifest = path.join(specDir, 'manifest.json')
    writeManifest(inManifest, { numClasses: 2, entries }, specDir)

    const outDir = path.join(tmp, 'acts')
    const exported = await exportDataset({
      architecture: 'toy-2layer',
      layers: ['conv1', 'conv2'],
      manifestPath: inManifest,
      outDir,
    })
    expect(exported.entries).toHaveLength(6)

    // zero float32 drift: the Python reader sees bit-identical payloads
    const probePath = exported.entries[0].path
    const oursBase64 = readActivationFile(probePath).map((r) =>
      Buffer.from(r.values.buffer, r.values.byteOffset, r.values.byteLength).toString(
        'base64',
      ),
    )
    const theirs = execFileSync(
      'python3',
      [
        '-c',
        'import base64, sys\n' +
          'from gramsec import read_activations\n' +
          'sample = read_activations(sys.argv[1])\n' +
          'for record in sample.records:\n' +
          '    print(base64.b64encode(record.values.tobytes()).decode())\n',
        probePath,
      ],
      { encoding: 'utf-8' },
    )
      .trim()
      .split('\n')
    expect(theirs).toEqual(oursBase64)

    // the primary pipeline accepts the exported dataset end to end
    const summaryPath = path.join(tmp, 'summary.gram')
    const summarizeOut = gramsec(
      'summarize', '--in', probePath, '--out', summaryPath,
    )
    expect(summarizeOut).toMatch(/wrote 2 layer summaries/)

    const modelPath = path.join(tmp, 'model.gram')
    const fitOut = gramsec(
      'fit', '--manifest', path.join(outDir, 'manifest.json'), '--out', modelPath,
    )
    expect(fitOut).toMatch(/wrote model/)
    expect(fs.existsSync(modelPath)).toBe(true)

    // and the manifest mirrors the input splits
    const outManifest = readManifest(path.join(outDir, 'manifest.json'))
    expect(outManifest.entries.map((e) => `${e.id}:${e.split}:${e.label}`)).toEqual(
      entries.map((e) => `${e.id}:${e.split}:${e.label}`),
    )
  }, 120_000)
})
