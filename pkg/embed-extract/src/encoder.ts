/**
 * Sentence encoders behind one interface.
 *
 * Two families are supported:
 *  - "hash:<dim>" — a fully offline, deterministic feature-hashing
 *    encoder (unit-normalized random projections keyed by token hash).
 *    It exists so pipelines and tests run without downloading model
 *    weights; identical input always produces identical bytes.
 *  - any other id — treated as a transformers.js model identifier
 *    (e.g. "Xenova/all-MiniLM-L6-v2") loaded via @xenova/transformers,
 *    which must be installed separately: npm i @xenova/transformers
 */

export type Pooling = "cls_token" | "mean_tokens";

export interface Encoder {
  readonly dim: number | null;
  encodeBatch(texts: string[]): Promise<number[][]>;
}

export class EncoderError extends Error {}

const TOKEN_RE = /[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]/g;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

/** 32-bit FNV-1a; all arithmetic is exact integer math on doubles. */
function fnv1a(text: string, seed: number): number {
  let h = (0x811c9dc5 ^ seed) >>> 0;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG over a 32-bit state. */
function mulberry32(state: number): () => number {
  let a = state >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function hashedVector(key: string, dim: number, seed: number): number[] {
  const next = mulberry32(fnv1a(key, seed));
  const out = new Array<number>(dim);
  for (let i = 0; i < dim; i++) {
    out[i] = next() - 0.5;
  }
  return out;
}

function normalize(vec: number[]): number[] {
  const norm = Math.sqrt(vec.reduce((acc, v) => acc + v * v, 0));
  if (norm === 0) {
    return vec;
  }
  return vec.map((v) => v / norm);
}

export class HashEncoder implements Encoder {
  readonly dim: number;
  private readonly pooling: Pooling;
  private readonly maxTokens: number;

  constructor(dim: number, pooling: Pooling, maxTokens: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new EncoderError(`hash encoder dimension must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.pooling = pooling;
    this.maxTokens = maxTokens;
  }

  private encodeOne(text: string): number[] {
    const tokens = tokenize(text).slice(0, this.maxTokens);
    if (this.pooling === "cls_token") {
      // Sequence-level summary: a single projection keyed by the
      // order-sensitive chain of truncated tokens (CLS analogue).
      return normalize(hashedVector(tokens.join(""), this.dim, 0xc15));
    }
    const acc = new Array<number>(this.dim).fill(0);
    for (const token of tokens) {
      const vec = hashedVector(token, this.dim, 0x3ea);
      for (let i = 0; i < this.dim; i++) {
        acc[i] += vec[i];
      }
    }
    if (tokens.length > 0) {
      for (let i = 0; i < this.dim; i++) {
        acc[i] /= tokens.length;
      }
    }
    return normalize(acc);
  }

  async encodeBatch(texts: string[]): Promise<number[][]> {
    return texts.map((t) => this.encodeOne(t));
  }
}

class TransformerEncoder implements Encoder {
  dim: number | null = null;
  private extractor: any;
  private readonly pooling: Pooling;
  private readonly maxTokens: number;

  private constructor(extractor: any, pooling: Pooling, maxTokens: number) {
    this.extractor = extractor;
    this.pooling = pooling;
    this.maxTokens = maxTokens;
  }

  static async load(modelId: string, pooling: Pooling, maxTokens: number): Promise<TransformerEncoder> {
    const moduleName = "@xenova/transformers";
    let mod: any;
    try {
      mod = await import(moduleName);
    } catch {
      throw new EncoderError(
        `encoder ${modelId} needs the transformers runtime; ` +
          `install it with: npm i ${moduleName} (or use the offline "hash:<dim>" encoder)`,
      );
    }
    let extractor: any;
    try {
      extractor = await mod.pipeline("feature-extraction", modelId);
    } catch (err) {
      throw new EncoderError(`failed to load encoder ${modelId}: ${(err as Error).message}`);
    }
    return new TransformerEncoder(extractor, pooling, maxTokens);
  }

  async encodeBatch(texts: string[]): Promise<number[][]> {
    const output = await this.extractor(texts, {
      pooling: this.pooling === "cls_token" ? "cls" : "mean",
      normalize: true,
      truncation: true,
      max_length: this.maxTokens,
    });
    const rows: number[][] = output.tolist();
    if (rows.length > 0) {
      this.dim = rows[0].length;
    }
    return rows;
  }
}

export async function createEncoder(
  encoderId: string,
  pooling: Pooling,
  maxTokens: number,
): Promise<Encoder> {
  const hashMatch = /^hash:(\d+)$/.exec(encoderId);
  if (hashMatch) {
    return new HashEncoder(parseInt(hashMatch[1], 10), pooling, maxTokens);
  }
  return TransformerEncoder.load(encoderId, pooling, maxTokens);
}
