/**
 * Image decoding (PNG, JPEG) and bilinear resize to the branch input size.
 */

import { readFileSync } from 'fs';
import jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

import { INPUT_SIZE } from './model.js';

export interface RawImage {
  width: number;
  height: number;
  /** interleaved RGBA, 8-bit */
  data: Uint8Array;
}

export function decodeImage(path: string): RawImage {
  const raw = readFileSync(path);
  if (raw.length >= 8 && raw.readUInt32BE(0) === 0x89504e47) {
    const png = PNG.sync.read(raw);
    return { width: png.width, height: png.height, data: png.data };
  }
  if (raw.length >= 2 && raw.readUInt16BE(0) === 0xffd8) {
    const img = jpeg.decode(raw, { useTArray: true, formatAsRGBA: true });
    return { width: img.width, height: img.height, data: img.data };
  }
  throw new Error('not a PNG or JPEG file');
}

/** Bilinear resize to INPUT_SIZE x INPUT_SIZE, dropping alpha; RGB in [0, 255]. */
export function resizeToInput(image: RawImage): Float32Array {
  const { width, height, data } = image;
  if (width < 1 || height < 1) throw new Error('empty image');
  const out = new Float32Array(INPUT_SIZE * INPUT_SIZE * 3);
  const sx = width / INPUT_SIZE;
  const sy = height / INPUT_SIZE;
  for (let y = 0; y < INPUT_SIZE; y++) {
    const fy = Math.min((y + 0.5) * sy - 0.5, height - 1);
    const y0 = Math.max(Math.floor(fy), 0);
    const y1 = Math.min(y0 + 1, height - 1);
    const wy = Math.max(fy - y0, 0);
    for (let x = 0; x < INPUT_SIZE; x++) {
      const fx = Math.min((x + 0.5) * sx - 0.5, width - 1);
      const x0 = Math.max(Math.floor(fx), 0);
      const x1 = Math.min(x0 + 1, width - 1);
      const wx = Math.max(fx - x0, 0);
      for (let c = 0; c < 3; c++) {
        const p00 = data[(y0 * width + x0) * 4 + c];
        const p01 = data[(y0 * width + x1) * 4 + c];
        const p10 = data[(y1 * width + x0) * 4 + c];
        const p11 = data[(y1 * width + x1) * 4 + c];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        out[(y * INPUT_SIZE + x) * 3 + c] = top + (bottom - top) * wy;
      }
    }
  }
  return out;
}

export function loadInputPixels(path: string): Float32Array {
  return resizeToInput(decodeImage(path));
}
