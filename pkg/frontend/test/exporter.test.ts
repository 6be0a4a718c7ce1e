import { spawnSync } from 'child_process';
import { copyFileSync, mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { PNG } from 'pngjs';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { exportEmbeddings, scanManifest } from '../src/exporter.js';
import { HEADER_SIZE, recordSize, validateStore } from '../src/format.js';
import { decodeImage, resizeToInput } from '../src/images.js';
import { OUTPUT_DIM, ProjectionEmbedder } from '../src/model.js';
import { main as cliMain } from '../src/cli.js';

let work: string;
let fixtureRoot: string;

/** Deterministic little RGB test image. */
function makePng(path: string, width: number, height: number, seed: number): void {
  const png = new PNG({ width, height });
  let state = seed >>> 0;
  const next = () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state;
  };
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = next() & 0xff;
    png.data[i * 4 + 1] = next() & 0xff;
    png.data[i * 4 + 2] = next() & 0xff;
    png.data[i * 4 + 3] = 255;
  }
  writeFileSync(path, PNG.sync.write(png));
}

beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), 'embs-'));
  // 2 identities x 3 images; bob/b2.png duplicates bob/b1.png byte for byte
  fixtureRoot = join(work, 'faces');
  mkdirSync(join(fixtureRoot, 'alice'), { recursive: true });
  mkdirSync(join(fixtureRoot, 'bob'), { recursive: true });
  makePng(join(fixtureRoot, 'alice', 'a1.png'), 40, 48, 1);
  makePng(join(fixtureRoot, 'alice', 'a2.png'), 64, 64, 2);
  makePng(join(fixtureRoot, 'alice', 'a3.png'), 160, 160, 3);
  makePng(join(fixtureRoot, 'bob', 'b1.png'), 52, 36, 4);
  copyFileSync(join(fixtureRoot, 'bob', 'b1.png'), join(fixtureRoot, 'bob', 'b2.png'));
  makePng(join(fixtureRoot, 'bob', 'b3.png'), 80, 100, 5);
});

afterAll(() => {
  rmSync(work, { recursive: true, force: true });
});

describe('manifest scan', () => {
  it('assigns dense identity ids by sorted folder name', () => {
    const manifest = scanManifest(fixtureRoot);
    expect(manifest.map((e) => [e.identity, e.name, e.files.length])).toEqual([
      [0, 'alice', 3],
      [1, 'bob', 3],
    ]);
  });
});

describe('embedding model', () => {
  it('is deterministic and emits the reference dimension', () => {
    const a = new ProjectionEmbedder('projection-v1');
    const b = new ProjectionEmbedder('projection-v1');
    const pixels = resizeToInput(decodeImage(join(fixtureRoot, 'alice', 'a1.png')));
    const ea = a.embed(pixels);
    const eb = b.embed(pixels);
    expect(ea.length).toBe(OUTPUT_DIM);
    expect(Buffer.from(ea.buffer).equals(Buffer.from(eb.buffer))).toBe(true);
  });

  it('rejects unknown model names', () => {
    expect(() => new ProjectionEmbedder('not-a-model')).toThrow(/unknown model/);
  });
});

describe('export', () => {
  it('writes a six-record store over two identities', () => {
    const out = join(work, 'faces.embs');
    const summary = exportEmbeddings(fixtureRoot, out, 'projection-v1');
    expect(summary.samples).toBe(6);
    expect(summary.identities).toBe(2);
    expect(summary.dimension).toBe(OUTPUT_DIM);
    expect(summary.skipped).toEqual([]);

    const check = validateStore(out);
    expect(check.violations).toEqual([]);
    expect(check.sampleCount).toBe(6);
    expect(check.identityCount).toBe(2);
    expect(check.dimension).toBe(OUTPUT_DIM);

    const names = JSON.parse(readFileSync(`${out}.names.json`, 'utf8'));
    expect(names).toEqual({ '0': 'alice', '1': 'bob' });
  });

  it('maps identical input images to identical embeddings', () => {
    const out = join(work, 'dup.embs');
    exportEmbeddings(fixtureRoot, out, 'projection-v1');
    const raw = readFileSync(out);
    const rec = recordSize(OUTPUT_DIM);
    // records are sorted: bob/b1 is record 3, bob/b2 is record 4
    const embOf = (i: number) =>
      raw.subarray(HEADER_SIZE + i * rec + 16, HEADER_SIZE + (i + 1) * rec);
    expect(embOf(3).equals(embOf(4))).toBe(true);
    expect(embOf(3).equals(embOf(5))).toBe(false);
  });

  it('is byte-deterministic across runs', () => {
    const a = join(work, 'run-a.embs');
    const b = join(work, 'run-b.embs');
    exportEmbeddings(fixtureRoot, a, 'projection-v1');
    exportEmbeddings(fixtureRoot, b, 'projection-v1');
    expect(readFileSync(a).equals(readFileSync(b))).toBe(true);
  });

  it('skips undecodable files with a manifest report', () => {
    const root = join(work, 'dirty');
    mkdirSync(join(root, 'carol'), { recursive: true });
    makePng(join(root, 'carol', 'ok.png'), 30, 30, 9);
    writeFileSync(join(root, 'carol', 'broken.png'), Buffer.from('not an image'));
    const summary = exportEmbeddings(root, join(work, 'dirty.embs'), 'projection-v1');
    expect(summary.samples).toBe(1);
    expect(summary.skipped).toHaveLength(1);
    expect(summary.skipped[0].file).toContain('broken.png');
  });

  it('fails when no image is usable', () => {
    const root = join(work, 'empty');
    mkdirSync(join(root, 'dave'), { recursive: true });
    writeFileSync(join(root, 'dave', 'junk.png'), Buffer.from('x'));
    expect(() =>
      exportEmbeddings(root, join(work, 'empty.embs'), 'projection-v1'),
    ).toThrow(/no usable images/);
  });
});

describe('validate', () => {
  it('flags bad magic at offset 0', () => {
    const path = join(work, 'badmagic.embs');
    writeFileSync(path, Buffer.concat([Buffer.from('XXXX'), Buffer.alloc(16)]));
    const summary = validateStore(path);
    expect(summary.violations.some((v) => v.offset === 0)).toBe(true);
  });

  it('flags truncation at the first incomplete record', () => {
    const out = join(work, 'trunc.embs');
    exportEmbeddings(fixtureRoot, out, 'projection-v1');
    const raw = readFileSync(out);
    const cut = join(work, 'cut.embs');
    writeFileSync(cut, raw.subarray(0, raw.length - 5));
    const summary = validateStore(cut);
    expect(summary.violations).toHaveLength(1);
    expect(summary.violations[0].offset).toBe(HEADER_SIZE + 5 * recordSize(OUTPUT_DIM));
  });

  it('flags a dimension/size mismatch', () => {
    const out = join(work, 'dmismatch.embs');
    exportEmbeddings(fixtureRoot, out, 'projection-v1');
    const raw = Buffer.from(readFileSync(out));
    raw.writeUInt32LE(OUTPUT_DIM - 1, 8); // header lies about the dimension
    const lied = join(work, 'lied.embs');
    writeFileSync(lied, raw);
    const summary = validateStore(lied);
    expect(summary.violations.length).toBeGreaterThan(0);
  });
});

describe('cli', () => {
  it('export and validate round-trip through the command surface', () => {
    const out = join(work, 'cli.embs');
    expect(cliMain(['export', '--root', fixtureRoot, '--out', out])).toBe(0);
    expect(cliMain(['validate', '--file', out])).toBe(0);
  });

  it('reports a nonzero status on violations', () => {
    const path = join(work, 'clibad.embs');
    writeFileSync(path, Buffer.from('EMBSgarbage here, not long enough'));
    expect(cliMain(['validate', '--file', path])).toBe(1);
  });

  it('rejects missing flags', () => {
    expect(cliMain(['export', '--root', fixtureRoot])).toBe(1);
  });
});

describe('cross-component contract', () => {
  it('exported stores load in the python pipeline', () => {
    const out = join(work, 'cross.embs');
    exportEmbeddings(fixtureRoot, out, 'projection-v1');
    const probe = spawnSync(
      'python3',
      [
        '-c',
        'import sys\n' +
          'from mklab.embeddings import load_embedding_store, load_identity_names\n' +
          'store = load_embedding_store(sys.argv[1])\n' +
          'names = load_identity_names(sys.argv[1])\n' +
          'print(store.dimension, len(store.samples), len(store.identities()), names[0], names[1])\n',
        out,
      ],
      { encoding: 'utf8' },
    );
    expect(probe.status, probe.stderr).toBe(0);
    expect(probe.stdout.trim()).toBe('1792 6 2 alice bob');
  });
});
