#!/usr/bin/env node
/**
 * embs-export: turn per-identity image folders into embedding stores.
 *
 *   embs-export export --root DIR --out FILE [--model NAME]
 *   embs-export validate --file FILE
 */

import { pathToFileURL } from 'url';

import { exportEmbeddings } from './exporter.js';
import { validateStore } from './format.js';
import { KNOWN_MODELS } from './model.js';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new Error(`malformed arguments near "${key}"`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function need(flags: Map<string, string>, key: string): string {
  const value = flags.get(key);
  if (value === undefined) throw new Error(`missing required flag --${key}`);
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === 'export') {
      const flags = parseFlags(rest);
      const summary = exportEmbeddings(
        need(flags, 'root'),
        need(flags, 'out'),
        flags.get('model') ?? KNOWN_MODELS[0],
      );
      console.log(
        `wrote ${summary.samples} samples over ${summary.identities} identities ` +
          `(d=${summary.dimension})` +
          (summary.skipped.length ? `, skipped ${summary.skipped.length}` : ''),
      );
      return 0;
    }
    if (command === 'validate') {
      const flags = parseFlags(rest);
      const summary = validateStore(need(flags, 'file'));
      console.log(
        `dimension ${summary.dimension}, ${summary.sampleCount} samples, ` +
          `${summary.identityCount} identities`,
      );
      for (const v of summary.violations) {
        console.error(`violation at byte ${v.offset}: ${v.message}`);
      }
      return summary.violations.length === 0 ? 0 : 1;
    }
    console.error('usage: embs-export export --root DIR --out FILE [--model NAME]');
    console.error('       embs-export validate --file FILE');
    return 2;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
