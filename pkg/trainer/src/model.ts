/**
 * A tiny windowed character-level causal LM with a low-rank adapter.
 *
 * Next-character logits come from an embedding lookup over a fixed context
 * window, one hidden layer, and an output projection whose base matrix is
 * frozen; the trainable update is the low-rank product A.B scaled by
 * scale/rank, with dropout on the adapter input during training (B starts
 * at zero, so the adapter's initial contribution is exactly zero).
 */

import * as tf from "@tensorflow/tfjs";
import type { TrainConfig } from "./config.js";

export class CharWindowLm {
  readonly embedding: tf.Variable;
  readonly hiddenKernel: tf.Variable;
  readonly hiddenBias: tf.Variable;
  readonly frozenOutKernel: tf.Tensor2D;
  readonly loraA: tf.Variable;
  readonly loraB: tf.Variable;
  readonly outBias: tf.Variable;
  private dropoutCalls = 0;

  constructor(
    readonly vocabSize: number,
    readonly config: TrainConfig,
  ) {
    const { contextWindow, embedDim, hiddenDim, loraRank, seed } = config;
    this.embedding = tf.variable(
      tf.randomNormal([vocabSize, embedDim], 0, 0.1, "float32", seed), true,
    );
    this.hiddenKernel = tf.variable(
      tf.randomNormal([contextWindow * embedDim, hiddenDim], 0, 0.05, "float32", seed + 1),
      true,
    );
    this.hiddenBias = tf.variable(tf.zeros([hiddenDim]), true);
    this.frozenOutKernel = tf.randomNormal(
      [hiddenDim, vocabSize], 0, 0.05, "float32", seed + 2,
    );
    this.loraA = tf.variable(
      tf.randomNormal([hiddenDim, loraRank], 0, 0.05, "float32", seed + 3), true,
    );
    this.loraB = tf.variable(tf.zeros([loraRank, vocabSize]), true);
    this.outBias = tf.variable(tf.zeros([vocabSize]), true);
  }

  trainableVariables(): tf.Variable[] {
    return [
      this.embedding, this.hiddenKernel, this.hiddenBias,
      this.loraA, this.loraB, this.outBias,
    ];
  }

  parameterCount(): number {
    let total = this.frozenOutKernel.size;
    for (const variable of this.trainableVariables()) total += variable.size;
    return total;
  }

  /** Logits [n, vocab] for integer context windows [n, window]. */
  logits(contexts: tf.Tensor2D, training = false): tf.Tensor2D {
    const { contextWindow, embedDim, loraRank, loraScale, loraDropout } = this.config;
    return tf.tidy(() => {
      const embedded = tf
        .gather(this.embedding, contexts.flatten())
        .reshape([contexts.shape[0], contextWindow * embedDim]);
      const hidden = tf.relu(tf.add(tf.matMul(embedded, this.hiddenKernel), this.hiddenBias));
      const base = tf.matMul(hidden, this.frozenOutKernel);
      // Deterministic dropout mask per call so a fixed config seed
      // reproduces the run bit for bit.
      const adapterIn = training && loraDropout > 0
        ? tf.dropout(hidden, loraDropout, undefined, this.config.seed * 100_003 + this.dropoutCalls++)
        : hidden;
      const adapter = tf.matMul(tf.matMul(adapterIn, this.loraA), this.loraB);
      const scaled = tf.mul(adapter, loraScale / loraRank);
      return tf.add(tf.add(base, scaled), this.outBias) as tf.Tensor2D;
    });
  }

  /** Mean cross-entropy over the supervised positions. */
  loss(contexts: tf.Tensor2D, targets: tf.Tensor1D, training: boolean): tf.Scalar {
    return tf.tidy(() => {
      const logits = this.logits(contexts, training);
      const labels = tf.oneHot(targets, this.vocabSize);
      return tf.losses.softmaxCrossEntropy(labels, logits).asScalar();
    });
  }

  /** Argmax character ids at the supervised positions (teacher forcing). */
  argmax(contexts: tf.Tensor2D): number[] {
    return tf.tidy(() => {
      const ids = this.logits(contexts, false).argMax(1);
      return Array.from(ids.dataSync());
    });
  }

  dispose(): void {
    for (const v of this.trainableVariables()) v.dispose();
    this.frozenOutKernel.dispose();
  }
}
