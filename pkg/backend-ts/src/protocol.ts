/**
 * Wire-protocol request handling.
 *
 * Requests: {"id": int, "op": str, ...} -> replies {"id": int, "ok": bool,
 * ...}. Train replies echo the received config and generate replies echo the
 * generation parameters, so clients can verify hyperparameters survived the
 * trip. Semantics mirror the reference mock shipped with the pipeline.
 */
import { mkdirSync, readFileSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import {
  DEFAULT_TRAIN_CONFIG,
  Example,
  TrainConfig,
  TrainedModel,
  fineTune,
  scoreText,
} from './model.js';
import { EMBED_DIM, VOCAB_SIZE, embedVector } from './text.js';

export interface Request {
  id?: number | string | null;
  op?: string;
  [key: string]: unknown;
}

export interface Reply {
  id: number | string | null;
  ok: boolean;
  [key: string]: unknown;
}

function floatsToBase64(arr: Float32Array): string {
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength).toString('base64');
}

function base64ToFloats(data: string): Float32Array {
  const buf = Buffer.from(data, 'base64');
  return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
}

export class ModelStore {
  private models = new Map<string, TrainedModel>();
  private counter = 0;
  private latest: string | null = null;

  constructor(private stateDir?: string) {
    if (stateDir) {
      mkdirSync(stateDir, { recursive: true });
      try {
        const meta = JSON.parse(
          readFileSync(join(stateDir, 'store.json'), 'utf8'),
        ) as { counter: number; latest: string | null; ids: string[] };
        this.counter = meta.counter;
        this.latest = meta.latest;
        for (const id of meta.ids) {
          const raw = JSON.parse(
            readFileSync(join(stateDir, `${id}.json`), 'utf8'),
          );
          this.models.set(id, {
            headWeights: base64ToFloats(raw.headWeights),
            headBias: base64ToFloats(raw.headBias),
            maxSeqTokens: raw.maxSeqTokens,
          });
        }
      } catch {
        // no saved state yet
      }
    }
  }

  private persist(id: string, model: TrainedModel): void {
    if (!this.stateDir) return;
    writeFileSync(
      join(this.stateDir, `${id}.json`),
      JSON.stringify({
        headWeights: floatsToBase64(model.headWeights),
        headBias: floatsToBase64(model.headBias),
        maxSeqTokens: model.maxSeqTokens,
      }),
    );
    writeFileSync(
      join(this.stateDir, 'store.json'),
      JSON.stringify({
        counter: this.counter,
        latest: this.latest,
        ids: [...this.models.keys()],
      }),
    );
  }

  async train(examples: Example[], config: Partial<TrainConfig>): Promise<string> {
    const model = await fineTune(examples, { ...DEFAULT_TRAIN_CONFIG, ...config });
    this.counter += 1;
    const id = `m${this.counter}`;
    this.models.set(id, model);
    this.latest = id;
    this.persist(id, model);
    return id;
  }

  get(id: string): TrainedModel | undefined {
    return this.models.get(id);
  }

  latestModel(): TrainedModel | undefined {
    return this.latest ? this.models.get(this.latest) : undefined;
  }
}

/** The trailing incomplete example: text after the final input marker. */
export function querySection(prompt: string): string {
  const idx = prompt.lastIndexOf('Text:');
  const tail = idx >= 0 ? prompt.slice(idx + 'Text:'.length) : prompt;
  const answerIdx = tail.lastIndexOf('\nAnswer:');
  return answerIdx >= 0 ? tail.slice(0, answerIdx) : tail;
}

export async function handleRequest(store: ModelStore, message: Request): Promise<Reply> {
  const id = message.id ?? null;
  const op = message.op;
  try {
    if (op === 'info') {
      return {
        id, ok: true,
        model: 'tfjs-hash-encoder',
        context_size: 512,
        num_labels: 2,
        vocab_size: VOCAB_SIZE,
        embed_dim: EMBED_DIM,
      };
    }
    if (op === 'train') {
      const config = (message.config ?? {}) as Partial<TrainConfig>;
      const examples = (message.examples ?? []) as Example[];
      if (!Array.isArray(examples) || examples.length === 0) {
        return { id, ok: false, error: 'train needs a nonempty examples list' };
      }
      const modelId = await store.train(examples, config);
      return { id, ok: true, model_id: modelId, config };
    }
    if (op === 'score') {
      const modelId = message.model_id as string;
      const texts = message.texts as string[];
      if (!Array.isArray(texts)) {
        return { id, ok: false, error: 'score needs a texts list' };
      }
      const model = store.get(modelId);
      if (!model) {
        return { id, ok: false, error: `unknown model '${modelId}'` };
      }
      return { id, ok: true, scores: texts.map((t) => scoreText(model, t)) };
    }
    if (op === 'embed') {
      const texts = message.texts as string[];
      if (!Array.isArray(texts)) {
        return { id, ok: false, error: 'embed needs a texts list' };
      }
      return { id, ok: true, vectors: texts.map(embedVector) };
    }
    if (op === 'generate') {
      const prompt = message.prompt;
      if (typeof prompt !== 'string') {
        return { id, ok: false, error: 'generate needs a prompt string' };
      }
      const model = store.latestModel();
      const section = querySection(prompt);
      const positive = model ? scoreText(model, section) >= 0.5 : false;
      return {
        id, ok: true,
        text: positive ? 'Yes.' : 'No.',
        params: {
          temperature: message.temperature ?? null,
          top_k: message.top_k ?? null,
          top_p: message.top_p ?? null,
        },
      };
    }
    return { id, ok: false, error: `unknown op '${String(op)}'` };
  } catch (exc) {
    return { id, ok: false, error: `bad request: ${(exc as Error).message}` };
  }
}
