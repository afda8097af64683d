/**
 * Sequence classifier: hashed-embedding encoder with a two-logit head.
 *
 * The encoder (deterministic hashed embedding table, mean pooling) is kept
 * frozen; fine-tuning trains the classification head that replaces the
 * final layer, with Adam, a linear learning-rate warmup, and decoupled
 * weight decay. The head starts at zero logits, so training is logistic
 * regression over pooled embeddings: deterministic, and fast enough for
 * CPU-only runs (the pure-JS tf backend makes full-encoder updates
 * prohibitively slow, and at a 2e-5 learning rate over a few hundred steps
 * the encoder would barely move anyway).
 */
import * as tf from '@tensorflow/tfjs';

import { EMBED_DIM, baseEmbeddingTable, pooledEmbedding } from './text.js';

export interface TrainConfig {
  learning_rate: number;
  max_epochs: number;
  warmup_steps: number;
  weight_decay: number;
  max_seq_tokens: number;
  feature_mode: string;
  batch_size?: number;
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  learning_rate: 2e-5,
  max_epochs: 3,
  warmup_steps: 500,
  weight_decay: 0.01,
  max_seq_tokens: 512,
  feature_mode: 'url_and_content',
  batch_size: 1,
};

export interface Example {
  text: string;
  label: 'positive' | 'negative';
}

export interface TrainedModel {
  headWeights: Float32Array; // EMBED_DIM x 2, row-major
  headBias: Float32Array; // 2
  maxSeqTokens: number;
}

/** mulberry32-backed seeded shuffle for batch order. */
function shuffled(n: number, seed: number): number[] {
  let a = seed >>> 0;
  const rand = () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

export async function fineTune(
  examples: Example[],
  config: Partial<TrainConfig>,
): Promise<TrainedModel> {
  if (examples.length === 0) throw new Error('no training examples');
  const cfg = { ...DEFAULT_TRAIN_CONFIG, ...config };
  const batchSize = Math.max(1, cfg.batch_size ?? 1);

  // Frozen encoder pass: pool every example once.
  const table = baseEmbeddingTable();
  const features = new Float32Array(examples.length * EMBED_DIM);
  for (let i = 0; i < examples.length; i++) {
    features.set(pooledEmbedding(examples[i].text, table, cfg.max_seq_tokens), i * EMBED_DIM);
  }
  const featureTensor = tf.tensor2d(features, [examples.length, EMBED_DIM]);
  const labels = examples.map((e) => (e.label === 'positive' ? 1 : 0));

  const headW = tf.variable(tf.zeros([EMBED_DIM, 2]));
  const headB = tf.variable(tf.zeros([2]));
  const optimizer = tf.train.adam(cfg.learning_rate);

  let step = 0;
  for (let epoch = 0; epoch < cfg.max_epochs; epoch++) {
    const order = shuffled(examples.length, 1000 + epoch);
    for (let start = 0; start < order.length; start += batchSize) {
      const batch = order.slice(start, start + batchSize);
      step += 1;
      const lr = cfg.learning_rate * Math.min(1, step / Math.max(1, cfg.warmup_steps));
      // Adam keeps learningRate as a plain property; updating it per step
      // applies the warmup schedule without resetting the moments.
      (optimizer as unknown as { learningRate: number }).learningRate = lr;

      optimizer.minimize(
        () =>
          tf.tidy(() => {
            const rows = tf.gather(featureTensor, tf.tensor1d(batch, 'int32'));
            const logits = rows.matMul(headW).add(headB);
            const targets = tf.oneHot(
              tf.tensor1d(batch.map((i) => labels[i]), 'int32'),
              2,
            );
            return tf.losses.softmaxCrossEntropy(targets, logits) as tf.Scalar;
          }),
        false,
        [headW, headB],
      );

      const decay = 1 - lr * cfg.weight_decay;
      tf.tidy(() => {
        headW.assign(headW.mul(decay));
      });
    }
  }

  const model: TrainedModel = {
    headWeights: new Float32Array(await headW.data()),
    headBias: new Float32Array(await headB.data()),
    maxSeqTokens: cfg.max_seq_tokens,
  };
  featureTensor.dispose();
  headW.dispose();
  headB.dispose();
  optimizer.dispose();
  return model;
}

/** Positive-class probability (softmax over the two logits). */
export function scoreText(model: TrainedModel, text: string): number {
  const pooled = pooledEmbedding(text, baseEmbeddingTable(), model.maxSeqTokens);
  const logits = [model.headBias[0], model.headBias[1]];
  for (let col = 0; col < EMBED_DIM; col++) {
    logits[0] += pooled[col] * model.headWeights[col * 2];
    logits[1] += pooled[col] * model.headWeights[col * 2 + 1];
  }
  const m = Math.max(logits[0], logits[1]);
  const e0 = Math.exp(logits[0] - m);
  const e1 = Math.exp(logits[1] - m);
  return e1 / (e0 + e1);
}

export function classProbabilities(model: TrainedModel, text: string): [number, number] {
  const p1 = scoreText(model, text);
  return [1 - p1, p1];
}
