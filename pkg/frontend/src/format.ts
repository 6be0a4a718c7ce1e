/**
 * Embedding store binary format (.embs), little-endian.
 *
 * Layout: magic "EMBS", u32 version=1, u32 dimension, u64 sample count;
 * then per record: u64 identity id, u64 sample index, dimension * float32.
 * An optional sidecar `<file>.names.json` maps identity id -> display name.
 */

import { readFileSync, writeFileSync } from 'fs';

export const STORE_MAGIC = 'EMBS';
export const STORE_VERSION = 1;
export const HEADER_SIZE = 20;

export interface StoreRecord {
  identity: number;
  sampleIndex: number;
  embedding: Float32Array;
}

export interface Violation {
  offset: number;
  message: string;
}

export interface StoreSummary {
  violations: Violation[];
  dimension: number;
  sampleCount: number;
  identityCount: number;
}

export function recordSize(dimension: number): number {
  return 16 + 4 * dimension;
}

/** Serialize records (sorted by identity, then sample index) into a store file. */
export function writeStore(
  records: StoreRecord[],
  dimension: number,
  outPath: string,
): void {
  const sorted = [...records].sort(
    (a, b) => a.identity - b.identity || a.sampleIndex - b.sampleIndex,
  );
  const buf = Buffer.alloc(HEADER_SIZE + sorted.length * recordSize(dimension));
  buf.write(STORE_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(STORE_VERSION, 4);
  buf.writeUInt32LE(dimension, 8);
  buf.writeBigUInt64LE(BigInt(sorted.length), 12);
  let off = HEADER_SIZE;
  for (const rec of sorted) {
    if (rec.embedding.length !== dimension) {
      throw new Error(
        `record (${rec.identity}, ${rec.sampleIndex}) has ${rec.embedding.length} values, expected ${dimension}`,
      );
    }
    buf.writeBigUInt64LE(BigInt(rec.identity), off);
    buf.writeBigUInt64LE(BigInt(rec.sampleIndex), off + 8);
    off += 16;
    for (let i = 0; i < dimension; i++) {
      buf.writeFloatLE(rec.embedding[i], off);
      off += 4;
    }
  }
  writeFileSync(outPath, buf);
}

export function writeNameSidecar(storePath: string, names: Map<number, string>): void {
  const doc: Record<string, string> = {};
  for (const [id, name] of names) doc[String(id)] = name;
  writeFileSync(`${storePath}.names.json`, JSON.stringify(doc));
}

/**
 * Check magic, version, dimension and record integrity; every violation
 * carries the byte offset where it was found.
 */
export function validateStore(path: string): StoreSummary {
  const violations: Violation[] = [];
  const raw = readFileSync(path);
  if (raw.length < HEADER_SIZE) {
    return {
      violations: [{ offset: raw.length, message: 'file shorter than header' }],
      dimension: 0,
      sampleCount: 0,
      identityCount: 0,
    };
  }
  if (raw.toString('ascii', 0, 4) !== STORE_MAGIC) {
    violations.push({ offset: 0, message: `bad magic, expected "${STORE_MAGIC}"` });
  }
  const version = raw.readUInt32LE(4);
  if (version !== STORE_VERSION) {
    violations.push({ offset: 4, message: `unsupported version ${version}` });
  }
  const dimension = raw.readUInt32LE(8);
  if (dimension < 1) {
    violations.push({ offset: 8, message: `non-positive dimension ${dimension}` });
  }
  const declared = Number(raw.readBigUInt64LE(12));
  const identities = new Set<number>();
  let sampleCount = 0;
  if (violations.length === 0) {
    const rec = recordSize(dimension);
    const body = raw.length - HEADER_SIZE;
    if (body !== declared * rec) {
      const complete = Math.floor(body / rec);
      violations.push({
        offset: HEADER_SIZE + complete * rec,
        message: `record data truncated: ${declared} records declared, ${body} bytes present`,
      });
      sampleCount = complete;
    } else {
      sampleCount = declared;
    }
    for (let i = 0; i < sampleCount; i++) {
      const off = HEADER_SIZE + i * rec;
      identities.add(Number(raw.readBigUInt64LE(off)));
      for (let k = 0; k < dimension; k++) {
        const value = raw.readFloatLE(off + 16 + 4 * k);
        if (!Number.isFinite(value)) {
          violations.push({
            offset: off + 16 + 4 * k,
            message: `non-finite embedding value in record ${i}`,
          });
          break;
        }
      }
    }
  }
  return {
    violations,
    dimension,
    sampleCount,
    identityCount: identities.size,
  };
}
