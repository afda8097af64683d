/**
 * Tokenization and deterministic hashed embeddings.
 *
 * Tokens are hashed into a fixed vocabulary; each vocabulary slot gets a
 * pseudo-random embedding row derived from its index, so the "pretrained"
 * encoder weights are reproducible without shipping a weights file.
 */
import { createHash } from 'node:crypto';

export const VOCAB_SIZE = 8192;
export const EMBED_DIM = 128;

const TOKEN_RE = /[\p{L}\p{N}_]+/gu;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

export function tokenId(word: string): number {
  const digest = createHash('sha256').update(word, 'utf8').digest();
  return digest.readUInt32BE(0) % VOCAB_SIZE;
}

/** mulberry32: tiny deterministic PRNG, good enough for init noise. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

let cachedTable: Float32Array | null = null;

/** The base encoder: VOCAB_SIZE x EMBED_DIM, rows seeded by row index. */
export function baseEmbeddingTable(): Float32Array {
  if (cachedTable) return cachedTable;
  const table = new Float32Array(VOCAB_SIZE * EMBED_DIM);
  const scale = 1 / Math.sqrt(EMBED_DIM);
  for (let row = 0; row < VOCAB_SIZE; row++) {
    const digest = createHash('sha256').update(`row${row}`).digest();
    const rand = mulberry32(digest.readUInt32BE(0));
    for (let col = 0; col < EMBED_DIM; col++) {
      table[row * EMBED_DIM + col] = (rand() * 2 - 1) * scale;
    }
  }
  cachedTable = table;
  return table;
}

export function tokenIds(text: string, maxTokens: number): number[] {
  return tokenize(text).slice(0, maxTokens).map(tokenId);
}

/** Mean-pooled embedding of a text under a given table. */
export function pooledEmbedding(
  text: string,
  table: Float32Array,
  maxTokens: number,
): Float32Array {
  const ids = tokenIds(text, maxTokens);
  const pooled = new Float32Array(EMBED_DIM);
  if (ids.length === 0) return pooled;
  for (const id of ids) {
    const base = id * EMBED_DIM;
    for (let col = 0; col < EMBED_DIM; col++) {
      pooled[col] += table[base + col];
    }
  }
  for (let col = 0; col < EMBED_DIM; col++) pooled[col] /= ids.length;
  return pooled;
}

/** Embedding for the "embed" op: pooled base embedding, L2-normalized. */
export function embedVector(text: string): number[] {
  const pooled = pooledEmbedding(text, baseEmbeddingTable(), 512);
  let norm = 0;
  for (const x of pooled) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm === 0) {
    const unit = new Array(EMBED_DIM).fill(0);
    unit[0] = 1;
    return unit;
  }
  return Array.from(pooled, (x) => x / norm);
}
