/**
 * Training configuration. The defaults mirror the reference fine-tuning
 * setup (LoRA rank/scale/dropout, epochs, batch and accumulation sizes,
 * learning-rate schedule, clipping, input cap, unweighted penalty); the
 * toy-model fields size the desk-scale character LM itself.
 */

export type PenaltyMode = "strict" | "extract";

export interface TrainConfig {
  loraRank: number;
  loraScale: number;
  loraDropout: number;
  epochs: number;
  perDeviceBatch: number;
  gradAccum: number;
  learningRate: number;
  warmupRatio: number;
  maxGradNorm: number;
  maxInputTokens: number;
  penaltyWeight: number;
  penaltyMode: PenaltyMode;
  /** Cross-check every step's protocol penalty against a local JSON parse. */
  debugParity: boolean;
  seed: number;
  // Toy model dimensions.
  contextWindow: number;
  embedDim: number;
  hiddenDim: number;
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  loraRank: 16,
  loraScale: 16,
  loraDropout: 0.05,
  epochs: 5,
  perDeviceBatch: 1,
  gradAccum: 4,
  learningRate: 2e-4,
  warmupRatio: 0.1,
  maxGradNorm: 0.3,
  maxInputTokens: 2048,
  penaltyWeight: 1.0,
  penaltyMode: "strict",
  debugParity: true,
  seed: 7,
  contextWindow: 12,
  embedDim: 16,
  hiddenDim: 128,
};

export function makeConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  const config = { ...DEFAULT_TRAIN_CONFIG, ...overrides };
  for (const [key, value] of Object.entries(config)) {
    if (typeof value === "number" && !(value >= 0)) {
      throw new Error(`config.${key} must be non-negative, got ${value}`);
    }
  }
  if (config.epochs < 1 || config.perDeviceBatch < 1 || config.gradAccum < 1) {
    throw new Error("epochs, perDeviceBatch and gradAccum must be positive");
  }
  return config;
}
