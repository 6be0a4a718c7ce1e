/**
 * Deterministic embedding branch over aligned 160x160x3 face crops.
 *
 * The branch is a fixed two-layer projection network whose weights are
 * derived from the model name: average-pool the crop to 20x20x3, center
 * the pixels, then project 1200 -> 512 (ReLU) -> 1792. The same image
 * always yields the same embedding, across runs and machines, and the
 * embedding is emitted exactly as computed (no normalization).
 */

export const INPUT_SIZE = 160;
export const POOLED_SIZE = 20;
export const HIDDEN_UNITS = 512;
export const OUTPUT_DIM = 1792;

const POOL = INPUT_SIZE / POOLED_SIZE;
const INPUT_UNITS = POOLED_SIZE * POOLED_SIZE * 3;

export const KNOWN_MODELS = ['projection-v1'];

/** FNV-1a, used to turn a model name into a weight seed. */
function hashName(name: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < name.length; i++) {
    h ^= name.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small, fast, reproducible across platforms. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianMatrix(rng: () => number, rows: number, cols: number, scale: number): Float32Array {
  const out = new Float32Array(rows * cols);
  for (let i = 0; i < out.length; i += 2) {
    // Box-Muller; rng never returns 0 exactly after the +1e-12 guard
    const u = rng() + 1e-12;
    const v = rng();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v) * scale;
    if (i + 1 < out.length) out[i + 1] = r * Math.sin(2 * Math.PI * v) * scale;
  }
  return out;
}

export class ProjectionEmbedder {
  readonly modelId: string;
  readonly dimension = OUTPUT_DIM;
  private readonly w1: Float32Array; // HIDDEN_UNITS x INPUT_UNITS
  private readonly w2: Float32Array; // OUTPUT_DIM x HIDDEN_UNITS

  constructor(modelId: string) {
    if (!KNOWN_MODELS.includes(modelId)) {
      throw new Error(
        `unknown model "${modelId}" (available: ${KNOWN_MODELS.join(', ')})`,
      );
    }
    this.modelId = modelId;
    const rng = makeRng(hashName(modelId));
    this.w1 = gaussianMatrix(rng, HIDDEN_UNITS, INPUT_UNITS, 1 / Math.sqrt(INPUT_UNITS));
    this.w2 = gaussianMatrix(rng, OUTPUT_DIM, HIDDEN_UNITS, 1 / Math.sqrt(HIDDEN_UNITS));
  }

  /**
   * Embed one aligned crop given as interleaved RGB floats in [0, 255],
   * length 160*160*3.
   */
  embed(pixels: Float32Array): Float32Array {
    if (pixels.length !== INPUT_SIZE * INPUT_SIZE * 3) {
      throw new Error(
        `expected ${INPUT_SIZE}x${INPUT_SIZE}x3 pixels, got ${pixels.length} values`,
      );
    }
    const pooled = new Float32Array(INPUT_UNITS);
    for (let py = 0; py < POOLED_SIZE; py++) {
      for (let px = 0; px < POOLED_SIZE; px++) {
        for (let c = 0; c < 3; c++) {
          let acc = 0;
          for (let dy = 0; dy < POOL; dy++) {
            const y = py * POOL + dy;
            for (let dx = 0; dx < POOL; dx++) {
              const x = px * POOL + dx;
              acc += pixels[(y * INPUT_SIZE + x) * 3 + c];
            }
          }
          pooled[(py * POOLED_SIZE + px) * 3 + c] = acc / (POOL * POOL) / 255 - 0.5;
        }
      }
    }
    const hidden = new Float32Array(HIDDEN_UNITS);
    for (let i = 0; i < HIDDEN_UNITS; i++) {
      let acc = 0;
      const row = i * INPUT_UNITS;
      for (let j = 0; j < INPUT_UNITS; j++) acc += this.w1[row + j] * pooled[j];
      hidden[i] = acc > 0 ? acc : 0;
    }
    const out = new Float32Array(OUTPUT_DIM);
    for (let i = 0; i < OUTPUT_DIM; i++) {
      let acc = 0;
      const row = i * HIDDEN_UNITS;
      for (let j = 0; j < HIDDEN_UNITS; j++) acc += this.w2[row + j] * hidden[j];
      out[i] = Math.fround(acc);
    }
    return out;
  }
}
