/**
 * Token-level training loop with the structural penalty in the loss.
 *
 * Each optimization step accumulates gradients over `gradAccum` examples,
 * argmax-decodes the supervised positions of those examples, sends the
 * decoded batch to the penalty service, and records
 * total = ce + weight * (failures / batchSize). The penalty is a scalar
 * added to the reported loss; it carries no gradient, so optimization
 * follows the cross-entropy term while the ledger tracks both.
 */

import * as tf from "@tensorflow/tfjs";
import { writeFileSync } from "node:fs";
import type { TrainConfig } from "./config.js";
import { EOS, SEP, TrainPair, Vocab, buildVocab, decode, encode, encodeExample, makeRng } from "./data.js";
import { CharWindowLm } from "./model.js";
import { PenaltyClient, strictJsonObject } from "./penaltyClient.js";

export class ParityMismatch extends Error {}

export interface StepLedger {
  step: number;
  ceLoss: number;
  structPenalty: number;
  penaltyWeight: number;
  totalLoss: number;
  batchSize: number;
  protocolFailures: number;
  localFailures: number;
}

export interface EpochLogRow {
  epoch: number;
  ceLoss: number;
  structPenalty: number;
  validityRate: number;
}

export interface TrainResult {
  model: CharWindowLm;
  vocab: Vocab;
  epochLog: EpochLogRow[];
  steps: StepLedger[];
}

function cosineLr(config: TrainConfig, step: number, totalSteps: number): number {
  const warmup = Math.max(1, Math.round(config.warmupRatio * totalSteps));
  if (step < warmup) {
    return (config.learningRate * (step + 1)) / warmup;
  }
  const progress = (step - warmup) / Math.max(1, totalSteps - warmup);
  return config.learningRate * 0.5 * (1 + Math.cos(Math.PI * progress));
}

function clipByGlobalNorm(grads: Record<string, tf.Tensor>, maxNorm: number): Record<string, tf.Tensor> {
  const squares = Object.values(grads).map((g) => tf.sum(tf.square(g)));
  const globalNorm = Math.sqrt(squares.reduce((acc, s) => acc + s.dataSync()[0], 0));
  squares.forEach((s) => s.dispose());
  if (globalNorm <= maxNorm || globalNorm === 0) {
    return grads;
  }
  const scale = maxNorm / globalNorm;
  const clipped: Record<string, tf.Tensor> = {};
  for (const [name, grad] of Object.entries(grads)) {
    clipped[name] = tf.mul(grad, scale);
    grad.dispose();
  }
  return clipped;
}

/** Greedy free-running decode of one output for a probe sentence. */
export function greedyDecode(
  model: CharWindowLm,
  vocab: Vocab,
  sentence: string,
  maxNew = 120,
): string {
  const window = model.config.contextWindow;
  let ids = encode(sentence + SEP, vocab);
  const generated: number[] = [];
  for (let i = 0; i < maxNew; i++) {
    const start = ids.length - window;
    const left = start < 0 ? Array(-start).fill(vocab.padId) : [];
    const context = [...left, ...ids.slice(Math.max(0, start))];
    const contexts = tf.tensor2d([context], [1, window], "int32");
    const next = model.argmax(contexts)[0];
    contexts.dispose();
    if (next === vocab.eosId) break;
    generated.push(next);
    ids = [...ids, next];
  }
  return decode(generated, vocab);
}

/** Strict validity fraction over greedy decodes of the probe sentences. */
export async function probeValidity(
  model: CharWindowLm,
  vocab: Vocab,
  probeSentences: string[],
  client: PenaltyClient,
  probeId: string,
): Promise<number> {
  const decoded = probeSentences.map((s) => greedyDecode(model, vocab, s));
  const result = await client.penalty(probeId, decoded);
  return 1 - result.penalty;
}

export async function train(
  pairs: TrainPair[],
  probeSentences: string[],
  config: TrainConfig,
  client: PenaltyClient,
): Promise<TrainResult> {
  if (pairs.length === 0) throw new Error("no training pairs");
  for (const pair of pairs) {
    if (!strictJsonObject(pair.target)) {
      throw new Error(`training target is not a JSON object: ${pair.target.slice(0, 40)}`);
    }
  }
  const vocab = buildVocab(pairs);
  const model = new CharWindowLm(vocab.chars.length, config);
  const encoded = pairs.map((p) =>
    encodeExample(p, vocab, config.contextWindow, config.maxInputTokens),
  );
  const optimizer = tf.train.adam(config.learningRate);
  const microPerStep = config.perDeviceBatch * config.gradAccum;
  const stepsPerEpoch = Math.ceil(pairs.length / microPerStep);
  const totalSteps = config.epochs * stepsPerEpoch;
  const rng = makeRng(config.seed);

  const steps: StepLedger[] = [];
  const epochLog: EpochLogRow[] = [];
  let globalStep = 0;

  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    const order = [...encoded.keys()];
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    const epochCe: number[] = [];
    const epochPenalty: number[] = [];

    for (let offset = 0; offset < order.length; offset += microPerStep) {
      const stepIndexes = order.slice(offset, offset + microPerStep);
      let accumulated: Record<string, tf.Tensor> | null = null;
      const ceValues: number[] = [];
      const decodedBatch: string[] = [];

      for (const index of stepIndexes) {
        const example = encoded[index];
        const contexts = tf.tensor2d(
          example.contexts, [example.contexts.length, config.contextWindow], "int32",
        );
        const targets = tf.tensor1d(example.targets, "int32");
        const { value, grads } = tf.variableGrads(
          () => model.loss(contexts, targets, true),
          model.trainableVariables(),
        );
        ceValues.push(value.dataSync()[0]);
        value.dispose();
        if (accumulated === null) {
          accumulated = grads;
        } else {
          for (const [name, grad] of Object.entries(grads)) {
            const prev = accumulated[name];
            accumulated[name] = tf.add(prev, grad);
            prev.dispose();
            grad.dispose();
          }
        }
        // Decode ŷ at the supervised positions of this example.
        const predicted = model.argmax(contexts);
        const cut = predicted.indexOf(vocab.eosId);
        decodedBatch.push(decode(cut === -1 ? predicted : predicted.slice(0, cut), vocab));
        contexts.dispose();
        targets.dispose();
      }

      const ceLoss = ceValues.reduce((a, b) => a + b, 0) / ceValues.length;
      const result = await client.penalty(`step-${globalStep}`, decodedBatch);
      const structPenalty = result.penalty;
      const totalLoss = ceLoss + config.penaltyWeight * structPenalty;
      const localFailures = decodedBatch.filter((s) => !strictJsonObject(s)).length;
      if (config.debugParity && localFailures !== result.failures) {
        throw new ParityMismatch(
          `step ${globalStep}: protocol failures ${result.failures} != local ${localFailures}`,
        );
      }
      steps.push({
        step: globalStep,
        ceLoss,
        structPenalty,
        penaltyWeight: config.penaltyWeight,
        totalLoss,
        batchSize: result.batchSize,
        protocolFailures: result.failures,
        localFailures,
      });
      epochCe.push(ceLoss);
      epochPenalty.push(structPenalty);

      let grads = accumulated!;
      for (const [name, grad] of Object.entries(grads)) {
        grads[name] = tf.div(grad, stepIndexes.length);
        grad.dispose();
      }
      grads = clipByGlobalNorm(grads, config.maxGradNorm);
      (optimizer as unknown as { learningRate: number }).learningRate = cosineLr(
        config, globalStep, totalSteps,
      );
      optimizer.applyGradients(
        grads as unknown as Parameters<typeof optimizer.applyGradients>[0],
      );
      for (const grad of Object.values(grads)) grad.dispose();
      globalStep++;
    }

    const validityRate = await probeValidity(
      model, vocab, probeSentences, client, `probe-epoch-${epoch}`,
    );
    epochLog.push({
      epoch,
      ceLoss: epochCe.reduce((a, b) => a + b, 0) / epochCe.length,
      structPenalty: epochPenalty.reduce((a, b) => a + b, 0) / epochPenalty.length,
      validityRate,
    });
  }

  optimizer.dispose();
  return { model, vocab, epochLog, steps };
}

export function epochLogCsv(rows: EpochLogRow[]): string {
  const lines = ["epoch,ce_loss,struct_penalty,validity_rate"];
  for (const row of rows) {
    lines.push(`${row.epoch},${row.ceLoss},${row.structPenalty},${row.validityRate}`);
  }
  return lines.join("\n") + "\n";
}

export function writeEpochLog(rows: EpochLogRow[], path: string): void {
  writeFileSync(path, epochLogCsv(rows), "utf-8");
}

export { EOS };
