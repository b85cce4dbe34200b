import * as tf from "@tensorflow/tfjs";

/**
 * The wasm backend ships without the Conv2DBackpropFilter kernel, which
 * blocks training any convolutional model.  For the stride-1, NHWC,
 * dilation-1 convolutions these architectures use, the filter gradient
 * is a plain im2col matmul, and the input gradient is conv2dTranspose;
 * both are built from kernels the wasm backend does provide.  This
 * replaces the Conv2D gradient with that formulation.
 */
export function registerWasmConvGradients(): void {
  tf.unregisterGradient("Conv2D");
  tf.registerGradient(
    {
      kernelName: "Conv2D",
      inputsToSave: ["x", "filter"],
      gradFunc: (dy, saved, attrs) => {
        const [x, filter] = saved as [tf.Tensor4D, tf.Tensor4D];
        const out = dy as tf.Tensor4D;
        const { strides, pad, dataFormat, dilations } = attrs as unknown as {
          strides: [number, number] | number;
          pad: "valid" | "same" | number;
          dataFormat: string;
          dilations: [number, number] | number;
        };
        const strideArr = typeof strides === "number" ? [strides, strides] : strides;
        const dilationArr =
          typeof dilations === "number" ? [dilations, dilations] : dilations ?? [1, 1];
        if (
          dataFormat !== "NHWC" ||
          strideArr[0] !== 1 ||
          strideArr[1] !== 1 ||
          dilationArr[0] !== 1 ||
          dilationArr[1] !== 1
        ) {
          throw new Error(
            "wasm conv gradient patch supports stride-1, dilation-1 NHWC convolutions only"
          );
        }
        return {
          x: () =>
            tf.conv2dTranspose(
              out,
              filter,
              x.shape as [number, number, number, number],
              strides as [number, number] | number,
              pad as "valid" | "same"
            ),
          filter: () => conv2dFilterGradViaMatMul(x, out, filter.shape, pad),
        };
      },
    });
}

function padAmounts(inSize: number, kernel: number, pad: "valid" | "same" | number) {
  if (pad === "valid") {
    return [0, 0];
  }
  if (pad === "same") {
    const total = kernel - 1;
    const before = Math.floor(total / 2);
    return [before, total - before];
  }
  return [pad as number, pad as number];
}

/** dW[kh,kw,ci,co] = sum_{b,h,w} x_pad[b,h+kh,w+kw,ci] * dy[b,h,w,co]. */
function conv2dFilterGradViaMatMul(
  x: tf.Tensor4D,
  dy: tf.Tensor4D,
  filterShape: number[],
  pad: "valid" | "same" | number
): tf.Tensor4D {
  const [kh, kw, cin, cout] = filterShape;
  const [batch, height, width] = x.shape;
  const [outH, outW] = [dy.shape[1], dy.shape[2]];
  return tf.tidy(() => {
    const [padTop, padBottom] = padAmounts(height, kh, pad);
    const [padLeft, padRight] = padAmounts(width, kw, pad);
    let padded = x;
    if (padTop || padBottom) {
      const above = tf.zeros([batch, padTop, width, cin]);
      const below = tf.zeros([batch, padBottom, width, cin]);
      padded = tf.concat([above, padded, below], 1) as tf.Tensor4D;
    }
    if (padLeft || padRight) {
      const w = padded.shape[1];
      const left = tf.zeros([batch, w, padLeft, cin]);
      const right = tf.zeros([batch, w, padRight, cin]);
      padded = tf.concat([left, padded, right], 2) as tf.Tensor4D;
    }
    const patches: tf.Tensor2D[] = [];
    for (let i = 0; i < kh; i++) {
      for (let j = 0; j < kw; j++) {
        const window = tf.slice(padded, [0, i, j, 0], [batch, outH, outW, cin]);
        patches.push(window.reshape([batch * outH * outW, cin]) as tf.Tensor2D);
      }
    }
    const columns = tf.concat(patches, 1); // [B*OH*OW, kh*kw*cin]
    const dyFlat = dy.reshape([batch * outH * outW, cout]) as tf.Tensor2D;
    const grad = tf.matMul(columns as tf.Tensor2D, dyFlat, true, false);
    return grad.reshape([kh, kw, cin, cout]) as tf.Tensor4D;
  });
}
