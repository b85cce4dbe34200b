import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";

interface WeightSpec {
  name: string;
  shape: number[];
}

/** Checkpoint format: JSON metadata plus base64-packed float32 weights.
 *  (The browser-oriented tf.LayersModel.save has no filesystem handler
 *  in plain Node, so weights are serialized directly.) */
export function saveWeights(model: tf.LayersModel, file: string): void {
  const weights = model.getWeights();
  const specs: WeightSpec[] = [];
  let total = 0;
  for (const w of weights) {
    total += w.size;
  }
  const packed = new Float32Array(total);
  let offset = 0;
  weights.forEach((w, i) => {
    specs.push({ name: model.weights[i].originalName, shape: [...w.shape] });
    packed.set(w.dataSync() as Float32Array, offset);
    offset += w.size;
  });
  const payload = {
    format: "airsig-deep-baselines/1",
    specs,
    data: Buffer.from(packed.buffer).toString("base64"),
  };
  fs.writeFileSync(file, JSON.stringify(payload));
}

export function loadWeights(model: tf.LayersModel, file: string): void {
  const payload = JSON.parse(fs.readFileSync(file, "utf-8"));
  const raw = Buffer.from(payload.data, "base64");
  const packed = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  const tensors: tf.Tensor[] = [];
  let offset = 0;
  for (const spec of payload.specs as WeightSpec[]) {
    const size = spec.shape.reduce((a, b) => a * b, 1);
    tensors.push(tf.tensor(packed.slice(offset, offset + size), spec.shape));
    offset += size;
  }
  model.setWeights(tensors);
  tensors.forEach((t) => t.dispose());
}
