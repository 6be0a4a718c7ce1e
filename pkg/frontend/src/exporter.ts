/**
 * Walk per-identity image folders, embed every decodable image and write
 * the result as an embedding store plus an identity-name sidecar.
 */

import { readdirSync, statSync } from 'fs';
import { join } from 'path';

import { StoreRecord, writeNameSidecar, writeStore } from './format.js';
import { loadInputPixels } from './images.js';
import { ProjectionEmbedder } from './model.js';

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg']);

export interface ManifestEntry {
  identity: number;
  name: string;
  files: string[];
}

export interface SkippedFile {
  file: string;
  reason: string;
}

export interface ExportSummary {
  identities: number;
  samples: number;
  dimension: number;
  skipped: SkippedFile[];
}

function extensionOf(file: string): string {
  const dot = file.lastIndexOf('.');
  return dot < 0 ? '' : file.slice(dot).toLowerCase();
}

/** Identity ids are assigned by sorted subdirectory name, dense from 0. */
export function scanManifest(root: string): ManifestEntry[] {
  const dirs = readdirSync(root)
    .filter((name) => statSync(join(root, name)).isDirectory())
    .sort();
  return dirs.map((name, identity) => ({
    identity,
    name,
    files: readdirSync(join(root, name))
      .filter((f) => IMAGE_EXTENSIONS.has(extensionOf(f)))
      .sort()
      .map((f) => join(root, name, f)),
  }));
}

export function exportEmbeddings(
  root: string,
  outPath: string,
  modelId: string,
): ExportSummary {
  const embedder = new ProjectionEmbedder(modelId);
  const manifest = scanManifest(root);
  const records: StoreRecord[] = [];
  const names = new Map<number, string>();
  const skipped: SkippedFile[] = [];
  for (const entry of manifest) {
    let sampleIndex = 0;
    for (const file of entry.files) {
      try {
        const pixels = loadInputPixels(file);
        records.push({
          identity: entry.identity,
          sampleIndex: sampleIndex++,
          embedding: embedder.embed(pixels),
        });
      } catch (err) {
        const reason = err instanceof Error ? err.message : String(err);
        console.warn(`skipping ${file}: ${reason}`);
        skipped.push({ file, reason });
      }
    }
    if (sampleIndex > 0) names.set(entry.identity, entry.name);
  }
  if (records.length === 0) {
    throw new Error(`no usable images under ${root}`);
  }
  writeStore(records, embedder.dimension, outPath);
  writeNameSidecar(outPath, names);
  return {
    identities: names.size,
    samples: records.length,
    dimension: embedder.dimension,
    skipped,
  };
}
