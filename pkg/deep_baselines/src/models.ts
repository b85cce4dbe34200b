import * as tf from "@tensorflow/tfjs";

export type ArchitectureKind = "fcn" | "resnet" | "inceptiontime" | "rnn";

export interface ArchitectureSpec {
  kind: ArchitectureKind;
  channels: 3 | 6 | 9;
  inputLength?: number;
}

export const INPUT_LENGTH = 1000;

/** Embedding width per architecture: 128 for the convolutional trio, 32 for the RNN. */
export function embeddingDim(kind: ArchitectureKind): number {
  return kind === "rnn" ? 32 : 128;
}

function convBnRelu(
  x: tf.SymbolicTensor,
  filters: number,
  kernelSize: number,
  namePrefix: string
): tf.SymbolicTensor {
  let out = tf.layers
    .conv1d({ filters, kernelSize, padding: "same", useBias: false, name: `${namePrefix}_conv` })
    .apply(x) as tf.SymbolicTensor;
  out = tf.layers.batchNormalization({ name: `${namePrefix}_bn` }).apply(out) as tf.SymbolicTensor;
  return tf.layers.reLU({ name: `${namePrefix}_relu` }).apply(out) as tf.SymbolicTensor;
}

/** Three conv stages (kernels 8/5/3, channels 128/256/128), global average
 *  pooling, then a linear projection to the 128-dim embedding space. */
function buildFcn(input: tf.SymbolicTensor): tf.SymbolicTensor {
  let x = convBnRelu(input, 128, 8, "fcn1");
  x = convBnRelu(x, 256, 5, "fcn2");
  x = convBnRelu(x, 128, 3, "fcn3");
  x = tf.layers.globalAveragePooling1d({ name: "fcn_gap" }).apply(x) as tf.SymbolicTensor;
  return tf.layers.dense({ units: 128, name: "fcn_embed" }).apply(x) as tf.SymbolicTensor;
}

/** Three residual blocks with kernels 8/5/3 and per-block channels
 *  64/128/256; shortcuts use a 1x1 conv where widths change. */
function buildResNet(input: tf.SymbolicTensor): tf.SymbolicTensor {
  let x = input;
  const blockChannels = [64, 128, 256];
  blockChannels.forEach((filters, b) => {
    const name = `res${b + 1}`;
    let y = convBnRelu(x, filters, 8, `${name}a`);
    y = convBnRelu(y, filters, 5, `${name}b`);
    y = tf.layers
      .conv1d({ filters, kernelSize: 3, padding: "same", useBias: false, name: `${name}c_conv` })
      .apply(y) as tf.SymbolicTensor;
    y = tf.layers.batchNormalization({ name: `${name}c_bn` }).apply(y) as tf.SymbolicTensor;
    let shortcut = x;
    if (x.shape[x.shape.length - 1] !== filters) {
      shortcut = tf.layers
        .conv1d({ filters, kernelSize: 1, padding: "same", useBias: false, name: `${name}_proj` })
        .apply(x) as tf.SymbolicTensor;
      shortcut = tf.layers
        .batchNormalization({ name: `${name}_proj_bn` })
        .apply(shortcut) as tf.SymbolicTensor;
    }
    x = tf.layers.add({ name: `${name}_add` }).apply([y, shortcut]) as tf.SymbolicTensor;
    x = tf.layers.reLU({ name: `${name}_out` }).apply(x) as tf.SymbolicTensor;
  });
  x = tf.layers.globalAveragePooling1d({ name: "res_gap" }).apply(x) as tf.SymbolicTensor;
  return tf.layers.dense({ units: 128, name: "res_embed" }).apply(x) as tf.SymbolicTensor;
}

export const INCEPTION_KERNELS = [3, 5, 8, 11, 17];
const INCEPTION_FILTERS = 32; // per parallel path; width not pinned by the architecture notes

function inceptionModule(x: tf.SymbolicTensor, name: string): tf.SymbolicTensor {
  const bottleneck = tf.layers
    .conv1d({
      filters: INCEPTION_FILTERS,
      kernelSize: 1,
      padding: "same",
      useBias: false,
      name: `${name}_bottleneck`,
    })
    .apply(x) as tf.SymbolicTensor;
  const paths = INCEPTION_KERNELS.map(
    (k) =>
      tf.layers
        .conv1d({
          filters: INCEPTION_FILTERS,
          kernelSize: k,
          padding: "same",
          useBias: false,
          name: `${name}_k${k}`,
        })
        .apply(bottleneck) as tf.SymbolicTensor
  );
  let pooled = tf.layers
    .maxPooling1d({ poolSize: 3, strides: 1, padding: "same", name: `${name}_pool` })
    .apply(x) as tf.SymbolicTensor;
  pooled = tf.layers
    .conv1d({
      filters: INCEPTION_FILTERS,
      kernelSize: 1,
      padding: "same",
      useBias: false,
      name: `${name}_poolconv`,
    })
    .apply(pooled) as tf.SymbolicTensor;
  let out = tf.layers
    .concatenate({ name: `${name}_concat` })
    .apply([...paths, pooled]) as tf.SymbolicTensor;
  out = tf.layers.batchNormalization({ name: `${name}_bn` }).apply(out) as tf.SymbolicTensor;
  return tf.layers.reLU({ name: `${name}_relu` }).apply(out) as tf.SymbolicTensor;
}

/** Two stacked blocks of three inception modules each (parallel kernels
 *  3/5/8/11/17 plus a max-pool path); a residual connection joins each
 *  block; global average pooling and a linear map to 128 dims. */
function buildInceptionTime(input: tf.SymbolicTensor): tf.SymbolicTensor {
  let x = input;
  for (let block = 0; block < 2; block++) {
    const blockInput = x;
    for (let mod = 0; mod < 3; mod++) {
      x = inceptionModule(x, `inc${block + 1}${"abc"[mod]}`);
    }
    let shortcut = blockInput;
    if (blockInput.shape[blockInput.shape.length - 1] !== x.shape[x.shape.length - 1]) {
      shortcut = tf.layers
        .conv1d({
          filters: x.shape[x.shape.length - 1] as number,
          kernelSize: 1,
          padding: "same",
          useBias: false,
          name: `inc${block + 1}_proj`,
        })
        .apply(blockInput) as tf.SymbolicTensor;
      shortcut = tf.layers
        .batchNormalization({ name: `inc${block + 1}_proj_bn` })
        .apply(shortcut) as tf.SymbolicTensor;
    }
    x = tf.layers.add({ name: `inc${block + 1}_add` }).apply([x, shortcut]) as tf.SymbolicTensor;
    x = tf.layers.reLU({ name: `inc${block + 1}_out` }).apply(x) as tf.SymbolicTensor;
  }
  x = tf.layers.globalAveragePooling1d({ name: "inc_gap" }).apply(x) as tf.SymbolicTensor;
  return tf.layers.dense({ units: 128, name: "inc_embed" }).apply(x) as tf.SymbolicTensor;
}

/** Two-layer bidirectional LSTM encoder; the final hidden states of both
 *  directions are concatenated and projected into a 32-dim embedding. */
function buildRnn(input: tf.SymbolicTensor): tf.SymbolicTensor {
  let x = tf.layers
    .bidirectional({
      layer: tf.layers.lstm({ units: 64, returnSequences: true }) as tf.RNN,
      mergeMode: "concat",
      name: "rnn1",
    })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers
    .bidirectional({
      layer: tf.layers.lstm({ units: 64, returnSequences: false }) as tf.RNN,
      mergeMode: "concat",
      name: "rnn2",
    })
    .apply(x) as tf.SymbolicTensor;
  return tf.layers.dense({ units: 32, name: "rnn_embed" }).apply(x) as tf.SymbolicTensor;
}

export function buildModel(spec: ArchitectureSpec): tf.LayersModel {
  if (![3, 6, 9].includes(spec.channels)) {
    throw new Error(`invalid channel count ${spec.channels}; expected 3, 6, or 9`);
  }
  const length = spec.inputLength ?? INPUT_LENGTH;
  const input = tf.input({ shape: [length, spec.channels], name: "signal" });
  let output: tf.SymbolicTensor;
  switch (spec.kind) {
    case "fcn":
      output = buildFcn(input);
      break;
    case "resnet":
      output = buildResNet(input);
      break;
    case "inceptiontime":
      output = buildInceptionTime(input);
      break;
    case "rnn":
      output = buildRnn(input);
      break;
    default:
      throw new Error(`unknown architecture ${(spec as { kind: string }).kind}`);
  }
  return tf.model({ inputs: input, outputs: output, name: spec.kind });
}

/** L2-normalize raw model outputs so cosine distances are stable. */
export function normalizeEmbeddings(raw: tf.Tensor2D): tf.Tensor2D {
  return tf.tidy(() => {
    const norms = tf.norm(raw, "euclidean", 1, true);
    return raw.div(norms.maximum(1e-12)) as tf.Tensor2D;
  });
}

/** Forward pass producing unit-norm embeddings (inference mode). */
export function embed(model: tf.LayersModel, batch: tf.Tensor3D): tf.Tensor2D {
  return tf.tidy(() => {
    const raw = model.predict(batch) as tf.Tensor2D;
    return normalizeEmbeddings(raw);
  });
}
