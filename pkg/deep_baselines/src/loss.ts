import * as tf from "@tensorflow/tfjs";

/** Row-wise cosine distance 1 - cos(a, b); range [0, 2]. */
export function cosineDistance(a: tf.Tensor2D, b: tf.Tensor2D): tf.Tensor1D {
  return tf.tidy(() => {
    const dot = a.mul(b).sum(1);
    const na = a.square().sum(1).sqrt().maximum(1e-12);
    const nb = b.square().sum(1).sqrt().maximum(1e-12);
    return tf.scalar(1).sub(dot.div(na.mul(nb))) as tf.Tensor1D;
  });
}

/**
 * Contrastive loss on cosine distance:
 *   L = mean( y * d^2 + (1 - y) * max(0, margin - d)^2 )
 * where y = 1 for genuine pairs. Genuine pairs are pulled together;
 * impostor pairs are pushed out until they clear the margin.
 */
export function contrastiveLoss(
  e1: tf.Tensor2D,
  e2: tf.Tensor2D,
  labels: tf.Tensor1D,
  margin: number
): tf.Scalar {
  return tf.tidy(() => {
    const d = cosineDistance(e1, e2);
    const genuine = labels.mul(d.square());
    const hinge = tf.scalar(margin).sub(d).maximum(0);
    const impostor = tf.scalar(1).sub(labels).mul(hinge.square());
    return genuine.add(impostor).mean() as tf.Scalar;
  });
}

export interface LossAndGrads {
  loss: number;
  grad1: number[][];
  grad2: number[][];
}

/**
 * Float64 reference implementation with analytic gradients with respect
 * to both embedding batches.  Used as the oracle for gradient checks and
 * to cross-validate the float32 autograd path.
 */
export function contrastiveLossRef(
  e1: number[][],
  e2: number[][],
  labels: number[],
  margin: number
): LossAndGrads {
  const batch = e1.length;
  const dim = e1[0].length;
  let total = 0;
  const grad1 = e1.map((row) => row.map(() => 0));
  const grad2 = e2.map((row) => row.map(() => 0));
  for (let i = 0; i < batch; i++) {
    const u = e1[i];
    const v = e2[i];
    let dot = 0;
    let nu = 0;
    let nv = 0;
    for (let k = 0; k < dim; k++) {
      dot += u[k] * v[k];
      nu += u[k] * u[k];
      nv += v[k] * v[k];
    }
    nu = Math.sqrt(nu);
    nv = Math.sqrt(nv);
    const cos = dot / (nu * nv);
    const d = 1 - cos;
    const y = labels[i];
    const hinge = Math.max(0, margin - d);
    total += y * d * d + (1 - y) * hinge * hinge;
    // dL/dd including the batch mean; hinge is already zero outside the margin
    const dLdd = (2 * y * d - 2 * (1 - y) * hinge) / batch;
    // dd/du = -(v / (|u||v|) - cos * u / |u|^2)
    for (let k = 0; k < dim; k++) {
      const dCos_du = v[k] / (nu * nv) - (cos * u[k]) / (nu * nu);
      const dCos_dv = u[k] / (nu * nv) - (cos * v[k]) / (nv * nv);
      grad1[i][k] = dLdd * -dCos_du;
      grad2[i][k] = dLdd * -dCos_dv;
    }
  }
  return { loss: total / batch, grad1, grad2 };
}
