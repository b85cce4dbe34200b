/**
 * End-to-end exchange with the primary toolkit: synthesize a population
 * and its fixed-length export with the primary CLI, smoke-train a
 * Siamese baseline, export embeddings, and have the PRIMARY harness
 * score them (functioning-pipeline bar: EER < 20% on random 4vs1).
 */
import { execFileSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { initBackend } from "../src/backend.js";
import { buildPairs, loadFixedExport, loadSplit, makeRng, sensorColumns } from "../src/data.js";
import { buildModel, embed } from "../src/models.js";
import { exportEmbeddings } from "../src/export.js";
import { DEFAULT_TRAIN, toTensor, trainSiamese } from "../src/train.js";
import { loadWeights, saveWeights } from "../src/weights.js";

const work = fs.mkdtempSync(path.join(os.tmpdir(), "airsig-deep-"));
const datasetDir = path.join(work, "ds");
const exportDir = path.join(work, "export");
const SENSORS = ["acc", "linacc", "gyro"];

function primary(args: string[]): string {
  return execFileSync("python3", ["-m", "airsig", ...args], {
    encoding: "utf-8",
    timeout: 300_000,
  });
}

beforeAll(async () => {
  await initBackend();
  primary(["synth", "--out", datasetDir, "--users", "20", "--seed", "42"]);
  primary(["export", "--dataset", datasetDir, "--out", exportDir, "--seed", "0"]);
}, 300_000);

describe("fixed-length exchange format", () => {
  it("loads the primary export with the declared geometry", () => {
    const data = loadFixedExport(exportDir);
    expect(data.length).toBe(1000);
    expect(data.channels).toHaveLength(9);
    expect(data.samples.length).toBe(240);
    const labels = new Set(data.samples.map((s) => s.label));
    expect(labels.has("genuine")).toBe(true);
    expect(labels.has("skilled_forgery")).toBe(true);
    for (const sample of data.samples.slice(0, 5)) {
      expect(sample.matrix.length).toBe(1000 * 9);
      expect([...sample.matrix.slice(0, 27)].every(Number.isFinite)).toBe(true);
    }
  });

  it("split manifest partitions the users", () => {
    const split = loadSplit(path.join(exportDir, "split_manifest.json"));
    expect(split.train.length + split.test.length).toBe(20);
    expect(split.train.length).toBe(16);
  });
});

describe("smoke train and primary-harness scoring", () => {
  it("trains, exports embeddings, and clears the pipeline EER bar", async () => {
    const data = loadFixedExport(exportDir);
    const split = loadSplit(path.join(exportDir, "split_manifest.json"));
    const model = buildModel({ kind: "fcn", channels: 9, inputLength: data.length });

    // fixed batch: four pairs reused every step, per the smoke contract
    const fixedPairs = buildPairs(data.samples, split.train, 4, 7);
    const config = { ...DEFAULT_TRAIN, steps: 10, batchSize: 4, sensors: SENSORS, seed: 7 };
    const losses = trainSiamese(model, fixedPairs, config);
    expect(losses).toHaveLength(10);
    expect(losses[9]).toBeLessThan(losses[0]);

    // checkpoint round trip must preserve behavior exactly
    const checkpoint = path.join(work, "fcn.weights.json");
    saveWeights(model, checkpoint);
    const twin = buildModel({ kind: "fcn", channels: 9, inputLength: data.length });
    loadWeights(twin, checkpoint);
    const probeBatch = toTensor(data.samples.slice(0, 2), sensorColumns(SENSORS));
    const eOrig = embed(model, probeBatch).dataSync();
    const eTwin = embed(twin, probeBatch).dataSync();
    eOrig.forEach((v, i) => expect(Math.abs(v - eTwin[i])).toBeLessThan(1e-7));

    // embedding exchange file: unit vectors, one row per sample
    const embeddingsCsv = path.join(work, "embeddings.csv");
    exportEmbeddings(model, data.samples, SENSORS, embeddingsCsv);
    const lines = fs.readFileSync(embeddingsCsv, "utf-8").trim().split("\n");
    expect(lines.length).toBe(1 + data.samples.length);
    expect(lines[0].startsWith("sample_id,e0,")).toBe(true);
    for (const line of lines.slice(1, 6)) {
      const values = line.split(",").slice(1).map(Number);
      const norm = Math.hypot(...values);
      expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
    }

    // repeated export from the same checkpoint is byte-identical
    const embeddingsCsv2 = path.join(work, "embeddings2.csv");
    exportEmbeddings(twin, data.samples, SENSORS, embeddingsCsv2);
    expect(fs.readFileSync(embeddingsCsv2, "utf-8")).toBe(
      fs.readFileSync(embeddingsCsv, "utf-8")
    );

    // genuine pairs sit closer than impostor pairs after training
    const vectors = new Map<string, number[]>();
    for (const line of lines.slice(1)) {
      const cells = line.split(",");
      vectors.set(cells[0], cells.slice(1).map(Number));
    }
    const cosDist = (a: number[], b: number[]) => {
      let dot = 0;
      for (let i = 0; i < a.length; i++) dot += a[i] * b[i];
      return 1 - dot; // unit vectors
    };
    const genuine = data.samples.filter((s) => s.label === "genuine");
    const rng = makeRng(3);
    const gen: number[] = [];
    const imp: number[] = [];
    for (let i = 0; i < 400; i++) {
      const a = genuine[Math.floor(rng() * genuine.length)];
      const b = genuine[Math.floor(rng() * genuine.length)];
      if (a === b) continue;
      const d = cosDist(vectors.get(a.sampleId)!, vectors.get(b.sampleId)!);
      (a.userId === b.userId ? gen : imp).push(d);
    }
    const mean = (xs: number[]) => xs.reduce((s, v) => s + v, 0) / xs.length;
    expect(mean(gen)).toBeLessThan(mean(imp));

    // the PRIMARY harness computes the acceptance EER
    const evalDir = path.join(work, "eval");
    primary([
      "eval",
      "--dataset", datasetDir,
      "--out", evalDir,
      "--scorer", `embedding:${embeddingsCsv}`,
      "--sensors", "linacc",
      "--mode", "4vs1",
      "--impostor", "random",
    ]);
    const reports = JSON.parse(
      fs.readFileSync(path.join(evalDir, "reports.json"), "utf-8")
    ).reports;
    expect(reports).toHaveLength(1);
    const eer = reports[0].eer;
    console.log(
      `[PASS expected] embedding-scorer random 4vs1 EER ${(100 * eer).toFixed(2)}% (< 20%)`
    );
    expect(eer).toBeLessThan(0.2);
  }, 600_000);
});
