import fs from "node:fs";
import path from "node:path";

import { initBackend } from "./backend.js";
import { buildPairs, loadFixedExport, loadSplit } from "./data.js";
import { ArchitectureKind, buildModel, embeddingDim } from "./models.js";
import { exportEmbeddings } from "./export.js";
import { DEFAULT_TRAIN, trainSiamese, writeLossCurve } from "./train.js";
import { loadWeights, saveWeights } from "./weights.js";

interface Args {
  [key: string]: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {};
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --key value pairs, got ${argv[i]}`);
    }
    args[argv[i].slice(2)] = argv[i + 1];
  }
  return args;
}

async function train(args: Args): Promise<void> {
  const backend = await initBackend();
  const data = loadFixedExport(args.data);
  const split = loadSplit(args.split ?? path.join(args.data, "split_manifest.json"));
  const sensors = (args.sensors ?? "acc,linacc,gyro").split(",");
  const arch = (args.arch ?? "fcn") as ArchitectureKind;
  const config = {
    ...DEFAULT_TRAIN,
    sensors,
    steps: Number(args.steps ?? DEFAULT_TRAIN.steps),
    batchSize: Number(args.batch ?? DEFAULT_TRAIN.batchSize),
    margin: Number(args.margin ?? DEFAULT_TRAIN.margin),
    learningRate: Number(args.lr ?? DEFAULT_TRAIN.learningRate),
    seed: Number(args.seed ?? 0),
  };
  const pairs = buildPairs(data.samples, split.train, config.steps * config.batchSize, config.seed);
  const model = buildModel({
    kind: arch,
    channels: (sensors.length * 3) as 3 | 6 | 9,
    inputLength: data.length,
  });
  console.log(
    `training ${arch} (${embeddingDim(arch)}-dim) on ${split.train.length} users, ` +
      `${pairs.length} pairs, backend ${backend}`
  );
  const losses = trainSiamese(model, pairs, config);
  fs.mkdirSync(args.out, { recursive: true });
  saveWeights(model, path.join(args.out, `${arch}.weights.json`));
  writeLossCurve(losses, path.join(args.out, `${arch}.loss.csv`));
  console.log(
    `final loss ${losses[losses.length - 1].toFixed(4)} after ${losses.length} steps; ` +
      `checkpoint in ${args.out}`
  );
}

async function exportCmd(args: Args): Promise<void> {
  await initBackend();
  const data = loadFixedExport(args.data);
  const sensors = (args.sensors ?? "acc,linacc,gyro").split(",");
  const arch = (args.arch ?? "fcn") as ArchitectureKind;
  const model = buildModel({
    kind: arch,
    channels: (sensors.length * 3) as 3 | 6 | 9,
    inputLength: data.length,
  });
  if (args.weights) {
    loadWeights(model, args.weights);
  }
  exportEmbeddings(model, data.samples, sensors, args.out);
  console.log(`wrote ${data.samples.length} embeddings to ${args.out}`);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  const args = parseArgs(rest);
  if (command === "train") {
    await train(args);
  } else if (command === "export") {
    await exportCmd(args);
  } else {
    console.error("usage: cli.ts train|export --data <fixed-export-dir> --out <path> [options]");
    process.exitCode = 2;
    return;
  }
}

main().catch((err) => {
  console.error(err.message ?? err);
  process.exitCode = 1;
});
