import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";

import { FixedSample, Pair, selectChannels, sensorColumns } from "./data.js";
import { contrastiveLoss } from "./loss.js";
import { normalizeEmbeddings } from "./models.js";

export interface TrainConfig {
  margin: number;
  learningRate: number;
  steps: number;
  batchSize: number;
  sensors: string[];
  seed: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  margin: 0.5,
  learningRate: 1e-3,
  steps: 60,
  batchSize: 8,
  sensors: ["acc", "linacc", "gyro"],
  seed: 0,
};

export function toTensor(
  samples: FixedSample[],
  columns: number[]
): tf.Tensor3D {
  const length = samples[0].length;
  const c = columns.length;
  const data = new Float32Array(samples.length * length * c);
  samples.forEach((sample, i) => {
    data.set(selectChannels(sample, columns), i * length * c);
  });
  return tf.tensor3d(data, [samples.length, length, c]);
}

/**
 * Siamese training loop: both branches share the model weights; the
 * contrastive loss acts on cosine distance between the normalized
 * embeddings.  Returns the per-step loss curve.
 */
export function trainSiamese(
  model: tf.LayersModel,
  pairs: Pair[],
  config: TrainConfig
): number[] {
  if (pairs.length === 0) {
    throw new Error("no training pairs supplied");
  }
  const columns = sensorColumns(config.sensors);
  const optimizer = tf.train.adam(config.learningRate);
  const losses: number[] = [];
  for (let step = 0; step < config.steps; step++) {
    const batch: Pair[] = [];
    for (let i = 0; i < config.batchSize; i++) {
      batch.push(pairs[(step * config.batchSize + i) % pairs.length]);
    }
    const x1 = toTensor(batch.map((p) => p.a), columns);
    const x2 = toTensor(batch.map((p) => p.b), columns);
    const y = tf.tensor1d(batch.map((p) => p.label));
    const lossValue = optimizer.minimize(
      () => {
        const e1 = normalizeEmbeddings(model.apply(x1, { training: true }) as tf.Tensor2D);
        const e2 = normalizeEmbeddings(model.apply(x2, { training: true }) as tf.Tensor2D);
        return contrastiveLoss(e1, e2, y as tf.Tensor1D, config.margin);
      },
      true
    ) as tf.Scalar;
    losses.push(lossValue.dataSync()[0]);
    lossValue.dispose();
    x1.dispose();
    x2.dispose();
    y.dispose();
  }
  optimizer.dispose();
  return losses;
}

export function writeLossCurve(losses: number[], file: string): void {
  const lines = ["step,loss"];
  losses.forEach((loss, i) => lines.push(`${i},${loss}`));
  fs.writeFileSync(file, lines.join("\n") + "\n");
}
