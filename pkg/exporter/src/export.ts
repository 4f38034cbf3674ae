/**
 * Dataset export: spectrogram files in, per-layer activation files out.
 *
 * Inputs are single-layer spectrograms in the interchange format (one
 * channel, bands x frames). Every sample is forwarded through the model,
 * the named capture points are recorded channel-major as float32, and the
 * emitted manifest mirrors the input split assignments.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

import {
  ActivationRecord,
  Manifest,
  ManifestEntry,
  readActivationFile,
  readManifest,
  writeActivationFile,
  writeManifest,
} from './format'
import { listCapturePoints, resolveArchitecture } from './models'

export interface ExportSpec {
  architecture: string
  /** capture-point layer names; exported in forward order */
  layers: string[]
  manifestPath: string
  outDir: string
  batchSize?: number
}

interface Spectrogram {
  height: number
  width: number
  values: Float32Array
}

function readSpectrogram(filePath: string): Spectrogram {
  const records = readActivationFile(filePath)
  if (records.length !== 1 || records[0].channels !== 1) {
    throw new Error(
      `${filePath}: expected a single-layer, single-channel spectrogram file`,
    )
  }
  const { height, width, values } = records[0]
  return { height, width, values }
}

export async function exportDataset(spec: ExportSpec): Promise<Manifest> {
  if (spec.layers.length === 0) {
    throw new Error('need at least one capture point')
  }
  const model = await resolveArchitecture(spec.architecture)
  const available = listCapturePoints(model)
  const names = new Set(available.map((p) => p.name))
  for (const requested of spec.layers) {
    if (!names.has(requested)) {
      throw new Error(
        `unknown capture point "${requested}"; available: ` +
          available.map((p) => p.name).join(', '),
      )
    }
  }
  // forward execution order regardless of how the flags were spelled
  const captures = available.filter((p) => spec.layers.includes(p.name))

  const manifest = readManifest(spec.manifestPath)
  if (manifest.entries.length === 0) throw new Error('manifest has no entries')
  fs.mkdirSync(spec.outDir, { recursive: true })

  const probe = tf.model({
    inputs: model.inputs,
    outputs: captures.map((p) => model.getLayer(p.name).output as tf.SymbolicTensor),
  })

  let shape: [number, number] | null = null
  const outEntries: ManifestEntry[] = []
  const batchSize = spec.batchSize ?? 8
  for (let start = 0; start < manifest.entries.length; start += batchSize) {
    const batch = manifest.entries.slice(start, start + batchSize)
    const specs = batch.map((entry) => {
      const spectrogram = readSpectrogram(entry.path)
      if (shape === null) {
        shape = [spectrogram.height, spectrogram.width]
      } else if (shape[0] !== spectrogram.height || shape[1] !== spectrogram.width) {
        throw new Error(
          `${entry.id}: spectrogram is ${spectrogram.height}x${spectrogram.width}, ` +
            `dataset started with ${shape[0]}x${shape[1]}`,
        )
      }
      return spectrogram
    })

    const outputs = tf.tidy(() => {
      const input = tf.stack(
        specs.map((s) => tf.tensor3d(s.values, [s.height, s.width, 1])),
      )
      const raw = probe.predict(input)
      const list = Array.isArray(raw) ? raw : [raw]
      // batch NHWC -> per-layer NCHW so payloads are channel-major
      return list.map((t) => tf.transpose(t as tf.Tensor4D, [0, 3, 1, 2]))
    })

    batch.forEach((entry, index) => {
      const records: ActivationRecord[] = outputs.map((tensor, layerIndex) => {
        const [, channels, height, width] = tensor.shape
        const sample = tf.tidy(() =>
          tensor.slice([index, 0, 0, 0], [1, channels, height, width]),
        )
        const values = sample.dataSync() as Float32Array
        sample.dispose()
        return { layerId: layerIndex, channels, height, width, values }
      })
      const fileName = `${entry.id}.gram`
      writeActivationFile(path.join(spec.outDir, fileName), records)
      outEntries.push({
        id: entry.id,
        split: entry.split,
        label: entry.label,
        path: path.resolve(spec.outDir, fileName),
      })
    })
    outputs.forEach((t) => t.dispose())
  }

  const exported: Manifest = { numClasses: manifest.numClasses, entries: outEntries }
  writeManifest(path.join(spec.outDir, 'manifest.json'), exported, spec.outDir)
  return exported
}
