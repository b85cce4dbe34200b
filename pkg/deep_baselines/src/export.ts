import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";

import { FixedSample, sensorColumns } from "./data.js";
import { embed } from "./models.js";
import { toTensor } from "./train.js";

/**
 * Write the embedding exchange CSV consumed by the primary harness:
 * one row per sample, `sample_id,e0,...,e{D-1}`, unit-norm vectors.
 */
export function exportEmbeddings(
  model: tf.LayersModel,
  samples: FixedSample[],
  sensors: string[],
  file: string,
  batchSize = 16
): void {
  const columns = sensorColumns(sensors);
  const rows: string[] = [];
  let dim = 0;
  for (let start = 0; start < samples.length; start += batchSize) {
    const chunk = samples.slice(start, start + batchSize);
    const x = toTensor(chunk, columns);
    const e = embed(model, x);
    const values = e.dataSync();
    dim = e.shape[1];
    chunk.forEach((sample, i) => {
      const vec = Array.from(values.slice(i * dim, (i + 1) * dim));
      rows.push(sample.sampleId + "," + vec.map((v) => v.toString()).join(","));
    });
    x.dispose();
    e.dispose();
  }
  const header = "sample_id," + Array.from({ length: dim }, (_, i) => `e${i}`).join(",");
  fs.writeFileSync(file, header + "\n" + rows.join("\n") + "\n");
}
