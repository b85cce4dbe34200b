import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";
import { fileURLToPath } from "node:url";
import path from "node:path";
import fs from "node:fs";

import { registerWasmConvGradients } from "./wasmPatches.js";

let ready: Promise<string> | null = null;

/** Initialize the fastest available backend (wasm, falling back to cpu). */
export function initBackend(): Promise<string> {
  if (!ready) {
    ready = (async () => {
      try {
        const here = path.dirname(fileURLToPath(import.meta.url));
        const candidates = [
          path.resolve(here, "../node_modules/@tensorflow/tfjs-backend-wasm/dist/"),
          path.resolve(here, "../../node_modules/@tensorflow/tfjs-backend-wasm/dist/"),
        ];
        const dist = candidates.find((p) => fs.existsSync(p));
        if (dist) {
          setWasmPaths(dist + path.sep);
          const ok = await tf.setBackend("wasm");
          if (ok) {
            await tf.ready();
            registerWasmConvGradients();
            return tf.getBackend();
          }
        }
      } catch {
        // fall through to the pure-JS backend
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return ready;
}
