/**
 * Toy run: 50 synthetic pairs, 5 epochs, penalty from the structsent CLI.
 *
 * The reference hyperparameters stay as config defaults; the learning rate
 * is raised here because this model trains from scratch rather than
 * adapting a pretrained one.
 */

import { makeConfig } from "./config.js";
import { makePairs } from "./data.js";
import { PenaltyClient } from "./penaltyClient.js";
import { train, writeEpochLog } from "./train.js";

async function main(): Promise<void> {
  const config = makeConfig({ learningRate: 1e-2, seed: 7 });
  const pairs = makePairs(50, config.seed);
  const probes = makePairs(12, config.seed + 1000).map((p) => p.sentence);
  const client = new PenaltyClient(config.penaltyMode);
  try {
    const started = Date.now();
    const { epochLog, steps, model } = await train(pairs, probes, config, client);
    console.log(`trained ${steps.length} optimizer steps in ${(Date.now() - started) / 1000}s`);
    console.log(`parameters: ${model.parameterCount()}`);
    console.log("epoch  ce_loss  struct_penalty  validity_rate");
    for (const row of epochLog) {
      console.log(
        `${row.epoch}      ${row.ceLoss.toFixed(4)}   ${row.structPenalty.toFixed(4)}`
        + `          ${row.validityRate.toFixed(2)}`,
      );
    }
    writeEpochLog(epochLog, "epoch_log.csv");
    console.log("epoch log written to epoch_log.csv");
    model.dispose();
  } finally {
    client.close();
  }
}

main().catch((error) => {
  console.error(error);
  process.exitCode = 1;
});
