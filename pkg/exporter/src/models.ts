/**
 * Architecture registry and capture-point introspection.
 *
 * Built-in toy CNNs get deterministic seeded weights so exports are
 * reproducible without any checkpoint. Converted tfjs layers models can
 * be loaded from disk with the "file:<path to model.json>" form.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

export interface CapturePoint {
  name: string
  /** output shape with the batch dimension dropped; null = any */
  shape: (number | null)[]
}

/** Deterministic 32-bit PRNG (mulberry32). */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seedConvWeights(model: tf.LayersModel, seed: number): void {
  model.layers.forEach((layer, index) => {
    const weights = layer.getWeights()
    if (weights.length === 0) return
    const rand = mulberry32(seed ^ (index + 1) * 0x9e3779b9)
    const seeded = weights.map((w, wi) => {
      if (wi > 0) return tf.zeros(w.shape) // biases stay zero
      const fanIn = w.shape.slice(0, -1).reduce((a, b) => a * (b ?? 1), 1)
      const scale = 1 / Math.sqrt(fanIn)
      const values = new Float32Array(w.size)
      for (let i = 0; i < values.length; i++) values[i] = (rand() * 2 - 1) * scale
      return tf.tensor(values, w.shape as number[])
    })
    layer.setWeights(seeded)
  })
}

function toyModel(convFilters: number[], seed: number): tf.LayersModel {
  const model = tf.sequential()
  convFilters.forEach((filters, index) => {
    const common = {
      filters,
      kernelSize: 3,
      padding: 'same' as const,
      activation: 'relu' as const,
      name: `conv${index + 1}`,
    }
    if (index === 0) {
      model.add(tf.layers.conv2d({ ...common, inputShape: [null, null, 1] as any }))
    } else {
      model.add(tf.layers.maxPooling2d({ poolSize: 2, name: `pool${index}` }))
      model.add(tf.layers.conv2d(common))
    }
  })
  seedConvWeights(model, seed)
  return model
}

const REGISTRY: Record<string, () => tf.LayersModel> = {
  'toy-2layer': () => toyModel([4, 8], 1),
  'toy-3layer': () => toyModel([4, 8, 16], 2),
}

export function knownArchitectures(): string[] {
  return Object.keys(REGISTRY)
}

/** Load a converted tfjs layers model (model.json + weight shards). */
export async function loadModelFromDisk(modelJsonPath: string): Promise<tf.LayersModel> {
  const spec = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'))
  const dir = path.dirname(modelJsonPath)
  const shards: Buffer[] = []
  const weightSpecs: tf.io.WeightsManifestEntry[] = []
  for (const group of spec.weightsManifest ?? []) {
    weightSpecs.push(...group.weights)
    for (const shard of group.paths) shards.push(fs.readFileSync(path.join(dir, shard)))
  }
  const weightData = new Uint8Array(Buffer.concat(shards)).buffer
  return tf.loadLayersModel(
    tf.io.fromMemory({ modelTopology: spec.modelTopology, weightSpecs, weightData }),
  )
}

export async function resolveArchitecture(name: string): Promise<tf.LayersModel> {
  if (name.startsWith('file:')) {
    return loadModelFromDisk(name.slice('file:'.length))
  }
  const build = REGISTRY[name]
  if (!build) {
    throw new Error(
      `unknown architecture "${name}"; known: ${knownArchitectures().join(', ')} ` +
        `or file:<path to model.json>`,
    )
  }
  return build()
}

function isPostActivation(layer: tf.layers.Layer): boolean {
  const config = layer.getConfig() as any
  const kind = layer.getClassName()
  if (kind === 'Activation' || kind === 'ReLU' || kind === 'LeakyReLU') return true
  return typeof config.activation === 'string' && config.activation !== 'linear'
}

/** Post-activation layers in forward execution order, with output shapes. */
export function listCapturePoints(model: tf.LayersModel): CapturePoint[] {
  return model.layers.filter(isPostActivation).map((layer) => ({
    name: layer.name,
    shape: (layer.outputShape as (number | null)[]).slice(1),
  }))
}
