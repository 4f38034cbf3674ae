#!/usr/bin/env node
/**
 * gramsec-export: dump CNN layer activations in the gramsec interchange
 * format.
 *
 *   gramsec-export --arch toy-2layer --layers conv1,conv2 \
 *     --manifest spectrograms/manifest.json --out activations/
 *   gramsec-export --arch toy-2layer --list-layers
 */

import { exportDataset } from './export'
import { listCapturePoints, resolveArchitecture } from './models'

interface Args {
  arch?: string
  layers?: string
  manifest?: string
  out?: string
  batch: number
  listLayers: boolean
}

function parseArgs(argv: string[]): Args {
  const args: Args = { batch: 8, listLayers: false }
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i]
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${flag}`)
      return argv[++i]
    }
    switch (flag) {
      case '--arch':
        args.arch = next()
        break
      case '--layers':
        args.layers = next()
        break
      case '--manifest':
        args.manifest = next()
        break
      case '--out':
        args.out = next()
        break
      case '--batch':
        args.batch = parseInt(next(), 10)
        break
      case '--list-layers':
        args.listLayers = true
        break
      case '--help':
      case '-h':
        printUsage()
        process.exit(0)
      default:
        throw new Error(`unknown flag ${flag}`)
    }
  }
  return args
}

function printUsage(): void {
  console.log(
    'usage: gramsec-export --arch <name> --layers <csv> --manifest <in.json> --out <dir> [--batch N]\n' +
      '       gramsec-export --arch <name> --list-layers',
  )
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2))
  if (!args.arch) {
    printUsage()
    return 1
  }
  if (args.listLayers) {
    const model = await resolveArchitecture(args.arch)
    for (const point of listCapturePoints(model)) {
      const shape = point.shape.map((d) => (d === null ? '?' : String(d))).join('x')
      console.log(`${point.name}  ${shape}`)
    }
    return 0
  }
  if (!args.layers || !args.manifest || !args.out) {
    printUsage()
    return 1
  }
  const manifest = await exportDataset({
    architecture: args.arch,
    layers: args.layers.split(',').map((s) => s.trim()).filter(Boolean),
    manifestPath: args.manifest,
    outDir: args.out,
    batchSize: args.batch,
  })
  console.log(`exported ${manifest.entries.length} samples to ${args.out}`)
  return 0
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err.message}`)
    process.exit(1)
  })
