import { beforeAll, describe, expect, it } from "vitest";
import * as tf from "@tensorflow/tfjs";

import { initBackend } from "../src/backend.js";
import {
  ArchitectureKind,
  INCEPTION_KERNELS,
  buildModel,
  embed,
  embeddingDim,
} from "../src/models.js";

beforeAll(async () => {
  await initBackend();
});

const CONV_ARCHS: ArchitectureKind[] = ["fcn", "resnet", "inceptiontime"];

function convLayers(model: tf.LayersModel) {
  return model.layers.filter((l) => l.getClassName() === "Conv1D");
}

describe("architecture audit", () => {
  it("fcn layer stack matches the published structure", () => {
    const model = buildModel({ kind: "fcn", channels: 9, inputLength: 1000 });
    const convs = convLayers(model).map((l) => l.getConfig());
    expect(convs.map((c) => (c.kernelSize as number[])[0])).toEqual([8, 5, 3]);
    expect(convs.map((c) => c.filters)).toEqual([128, 256, 128]);
    const pooling = model.layers.filter(
      (l) => l.getClassName() === "GlobalAveragePooling1D"
    );
    expect(pooling).toHaveLength(1);
    expect(model.outputs[0].shape).toEqual([null, 128]);
  });

  it("resnet has three blocks with channels 64/128/256 and kernels 8/5/3", () => {
    const model = buildModel({ kind: "resnet", channels: 9, inputLength: 1000 });
    for (const [block, filters] of [["res1", 64], ["res2", 128], ["res3", 256]] as const) {
      const kernels = convLayers(model)
        .filter((l) => l.name.startsWith(block) && !l.name.includes("proj"))
        .map((l) => (l.getConfig().kernelSize as number[])[0]);
      expect(kernels).toEqual([8, 5, 3]);
      const widths = convLayers(model)
        .filter((l) => l.name.startsWith(block) && !l.name.includes("proj"))
        .map((l) => l.getConfig().filters);
      expect(widths).toEqual([filters, filters, filters]);
    }
    // shortcut projections where widths change
    const adds = model.layers.filter((l) => l.getClassName() === "Add");
    expect(adds).toHaveLength(3);
    expect(model.outputs[0].shape).toEqual([null, 128]);
  });

  it("inceptiontime has 2 blocks x 3 modules with the five kernel paths", () => {
    const model = buildModel({ kind: "inceptiontime", channels: 9, inputLength: 1000 });
    for (const block of ["inc1", "inc2"]) {
      for (const mod of ["a", "b", "c"]) {
        const kernels = convLayers(model)
          .filter((l) => l.name.startsWith(`${block}${mod}_k`))
          .map((l) => (l.getConfig().kernelSize as number[])[0])
          .sort((x, y) => x - y);
        expect(kernels).toEqual([...INCEPTION_KERNELS].sort((x, y) => x - y));
        const bottleneck = model.layers.find((l) => l.name === `${block}${mod}_bottleneck`);
        expect(bottleneck).toBeDefined();
        const pool = model.layers.find((l) => l.name === `${block}${mod}_pool`);
        expect(pool?.getClassName()).toBe("MaxPooling1D");
      }
    }
    const adds = model.layers.filter((l) => l.getClassName() === "Add");
    expect(adds).toHaveLength(2); // one residual join per block
    expect(model.outputs[0].shape).toEqual([null, 128]);
  });

  it("rnn is a two-layer bidirectional LSTM into a 32-dim embedding", () => {
    const model = buildModel({ kind: "rnn", channels: 3, inputLength: 50 });
    const bidi = model.layers.filter((l) => l.getClassName() === "Bidirectional");
    expect(bidi).toHaveLength(2);
    expect(model.outputs[0].shape).toEqual([null, 32]);
  });

  it("rejects invalid channel counts", () => {
    expect(() => buildModel({ kind: "fcn", channels: 4 as 3 })).toThrow(/channel/);
  });
});

describe("forward pass", () => {
  it.each(CONV_ARCHS)("%s maps zeros to a finite embedding without NaNs", (kind) => {
    const model = buildModel({ kind, channels: 3, inputLength: 128 });
    const x = tf.zeros([2, 128, 3]) as tf.Tensor3D;
    const e = embed(model, x);
    expect(e.shape).toEqual([2, embeddingDim(kind)]);
    const values = e.dataSync();
    for (const v of values) {
      expect(Number.isFinite(v)).toBe(true);
    }
  });

  it.each(CONV_ARCHS)("%s produces unit-norm embeddings on real input", (kind) => {
    const model = buildModel({ kind, channels: 3, inputLength: 128 });
    const x = tf.randomNormal([2, 128, 3], 0, 1, "float32", 3) as tf.Tensor3D;
    const e = embed(model, x);
    const norms = tf.norm(e, "euclidean", 1).dataSync();
    for (const n of norms) {
      expect(n).toBeCloseTo(1.0, 5);
    }
  });

  it("identical inputs give identical embeddings in inference mode", () => {
    const model = buildModel({ kind: "fcn", channels: 3, inputLength: 128 });
    const row = tf.randomNormal([1, 128, 3], 0, 1, "float32", 7);
    const batch = tf.concat([row, row]) as tf.Tensor3D;
    const e = embed(model, batch);
    const [a, b] = tf.split(e, 2);
    const diff = a.sub(b).abs().max().dataSync()[0];
    expect(diff).toBe(0);
  });

  it("rnn forward pass produces a 32-dim embedding", async () => {
    const model = buildModel({ kind: "rnn", channels: 3, inputLength: 60 });
    const x = tf.randomNormal([2, 60, 3]) as tf.Tensor3D;
    const e = embed(model, x);
    expect(e.shape).toEqual([2, 32]);
    const norms = tf.norm(e, "euclidean", 1).dataSync();
    expect(norms[0]).toBeCloseTo(1.0, 5);
  });
});
